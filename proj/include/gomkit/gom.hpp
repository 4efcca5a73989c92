#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gomkit/error.hpp"
#include "gomkit/topology.hpp"

namespace gomkit {

/// Which modelling assumption a coefficient slot belongs to.
enum class Assumption {
  Transition,      // H1: own lags t-1, t-2
  IntraJoint,      // H2: sibling axes of the same joint
  InterLimb,       // H3: homologous joint on the mirrored limb
  SerialLimb,      // H4.1: parent / child joints
  NonSerialLimb,   // H4.2: designated non-serial partners
};

inline std::string_view assumption_tag(Assumption a) {
  switch (a) {
    case Assumption::Transition: return "H1";
    case Assumption::IntraJoint: return "H2";
    case Assumption::InterLimb: return "H3";
    case Assumption::SerialLimb: return "H4.1";
    case Assumption::NonSerialLimb: return "H4.2";
  }
  return "?";
}

inline Assumption parse_assumption_tag(std::string_view tag) {
  if (tag == "H1") return Assumption::Transition;
  if (tag == "H2") return Assumption::IntraJoint;
  if (tag == "H3") return Assumption::InterLimb;
  if (tag == "H4.1") return Assumption::SerialLimb;
  if (tag == "H4.2") return Assumption::NonSerialLimb;
  throw ValidationError("unknown assumption tag '" + std::string(tag) + "'");
}

struct Regressor {
  std::size_t channel = 0;
  Assumption assumption = Assumption::IntraJoint;

  bool operator==(const Regressor&) const = default;
};

/// One second-order model: target(t) = a1*target(t-1) - a2*target(t-2) + sum_i b_i*regressor_i(t-1).
/// Coefficient slots are ordered (a1, a2, b_1 .. b_n).
struct GomEquation {
  std::size_t target = 0;
  std::vector<Regressor> regressors;

  std::size_t coefficient_count() const { return 2 + regressors.size(); }

  Assumption assumption_of_slot(std::size_t slot) const {
    return slot < 2 ? Assumption::Transition : regressors.at(slot - 2).assumption;
  }

  std::vector<std::size_t> regressor_channels() const {
    std::vector<std::size_t> out;
    out.reserve(regressors.size());
    for (const auto& r : regressors) out.push_back(r.channel);
    return out;
  }

  bool operator==(const GomEquation&) const = default;
};

/// Regressor families of a target channel, before flattening into an equation.
struct AssumptionSet {
  std::size_t target = 0;
  std::vector<std::size_t> intra_joint;
  std::vector<std::size_t> inter_limb;
  std::vector<std::size_t> serial;
  std::vector<std::size_t> nonserial;
};

inline AssumptionSet assumption_set(const SkeletonTopology& topology, std::size_t channel) {
  if (channel >= topology.channel_count())
    throw NotFoundError("unknown channel index " + std::to_string(channel));
  const std::size_t joint = SkeletonTopology::joint_of_channel(channel);
  const Axis axis = SkeletonTopology::axis_of_channel(channel);
  std::vector<bool> used(topology.channel_count(), false);
  used[channel] = true;

  AssumptionSet set;
  set.target = channel;
  auto take = [&](std::vector<std::size_t>& into, std::size_t c) {
    if (!used[c]) {
      used[c] = true;
      into.push_back(c);
    }
  };
  for (Axis a : kAxes) take(set.intra_joint, SkeletonTopology::channel(joint, a));
  if (auto m = topology.mirror(joint)) take(set.inter_limb, SkeletonTopology::channel(*m, axis));

  std::vector<std::size_t> serial;
  if (auto p = topology.parent(joint)) serial.push_back(*p);
  for (auto c : topology.children(joint)) serial.push_back(c);
  std::sort(serial.begin(), serial.end());
  for (auto j : serial) take(set.serial, SkeletonTopology::channel(j, axis));
  for (auto j : topology.nonserial(joint)) take(set.nonserial, SkeletonTopology::channel(j, axis));
  return set;
}

/// Equation for one channel: H2, then H3, H4.1, H4.2; topology order within each family.
inline GomEquation build_equation(const SkeletonTopology& topology, std::size_t channel) {
  const auto set = assumption_set(topology, channel);
  GomEquation eq;
  eq.target = channel;
  for (auto c : set.intra_joint) eq.regressors.push_back({c, Assumption::IntraJoint});
  for (auto c : set.inter_limb) eq.regressors.push_back({c, Assumption::InterLimb});
  for (auto c : set.serial) eq.regressors.push_back({c, Assumption::SerialLimb});
  for (auto c : set.nonserial) eq.regressors.push_back({c, Assumption::NonSerialLimb});
  return eq;
}

inline GomEquation build_equation(const SkeletonTopology& topology, std::string_view channel) {
  return build_equation(topology, topology.channel_index(channel));
}

/// The full equation system, one equation per channel in channel order.
struct GomSystem {
  SkeletonTopology topology;
  std::vector<GomEquation> equations;

  std::size_t size() const { return equations.size(); }
  bool operator==(const GomSystem& o) const { return topology == o.topology && equations == o.equations; }
};

inline GomSystem build_system(const SkeletonTopology& topology) {
  GomSystem sys{topology, {}};
  sys.equations.reserve(topology.channel_count());
  for (std::size_t c = 0; c < topology.channel_count(); ++c) sys.equations.push_back(build_equation(topology, c));
  return sys;
}

/// Time-varying coefficients of one equation. Row k holds the coefficients
/// used to predict frame k+2 of the training sequence.
struct CoefficientTrajectory {
  std::size_t target = 0;
  Eigen::MatrixXd mean;     // steps x (2 + n)
  Eigen::MatrixXd variance; // steps x (2 + n), posterior variances

  std::size_t steps() const { return static_cast<std::size_t>(mean.rows()); }
  std::size_t coefficient_count() const { return static_cast<std::size_t>(mean.cols()); }

  /// Coefficients at step k, holding the last row beyond the end.
  Eigen::VectorXd at_step(std::size_t k) const {
    if (mean.rows() == 0) throw ShapeError("empty coefficient trajectory");
    const auto row = static_cast<Eigen::Index>(std::min<std::size_t>(k, steps() - 1));
    return mean.row(row).transpose();
  }

  void validate() const {
    if (mean.rows() != variance.rows() || mean.cols() != variance.cols())
      throw ShapeError("coefficient mean and variance shapes differ");
    for (Eigen::Index i = 0; i < mean.rows(); ++i)
      for (Eigen::Index j = 0; j < mean.cols(); ++j) {
        if (!std::isfinite(mean(i, j)) || !std::isfinite(variance(i, j)))
          throw NumericalError("non-finite coefficient trajectory entry");
        if (variance(i, j) < 0.0) throw NumericalError("negative coefficient variance");
      }
  }
};

/// Regressor row h with y_hat = h . coefficients: (x(t-1), -x(t-2), r_1(t-1), ...).
template <typename Prev1, typename Prev2>
Eigen::VectorXd regressor_row(const GomEquation& eq, const Prev1& prev1, const Prev2& prev2) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(eq.coefficient_count()));
  h(0) = prev1(static_cast<Eigen::Index>(eq.target));
  h(1) = -prev2(static_cast<Eigen::Index>(eq.target));
  for (std::size_t i = 0; i < eq.regressors.size(); ++i)
    h(static_cast<Eigen::Index>(i + 2)) = prev1(static_cast<Eigen::Index>(eq.regressors[i].channel));
  return h;
}

/// One-step prediction of the target. `prev1`/`prev2` are full postures at t-1 and t-2.
template <typename Coeffs, typename Prev1, typename Prev2>
double eval_equation(const GomEquation& eq, const Coeffs& coeffs, const Prev1& prev1, const Prev2& prev2) {
  if (static_cast<std::size_t>(coeffs.size()) != eq.coefficient_count())
    throw ShapeError("equation has " + std::to_string(eq.coefficient_count()) + " coefficient slots, got " +
                     std::to_string(coeffs.size()));
  const auto t = static_cast<Eigen::Index>(eq.target);
  if (t >= prev1.size() || t >= prev2.size()) throw ShapeError("history frame too narrow for equation target");
  double y = coeffs(0) * prev1(t) - coeffs(1) * prev2(t);
  for (std::size_t i = 0; i < eq.regressors.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(eq.regressors[i].channel);
    if (c >= prev1.size()) throw ShapeError("history frame too narrow for regressor");
    y += coeffs(static_cast<Eigen::Index>(i + 2)) * prev1(c);
  }
  return y;
}

/// Dense N x 2 x N coefficient tensor of the whole system at one time step.
/// Slot (i, 0, k) multiplies P_k(t-1); slot (i, 1, k) multiplies -P_k(t-2).
class SystemTensor {
public:
  SystemTensor() = default;
  explicit SystemTensor(std::size_t n) : n_(n), data_(n * 2 * n, 0.0) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t w, std::size_t k) { return data_[index(i, w, k)]; }
  double operator()(std::size_t i, std::size_t w, std::size_t k) const { return data_[index(i, w, k)]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

private:
  std::size_t index(std::size_t i, std::size_t w, std::size_t k) const { return (i * 2 + w) * n_ + k; }
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Writes one equation's coefficients into its row of the tensor.
template <typename Coeffs>
void scatter_equation(const GomEquation& eq, const Coeffs& coeffs, SystemTensor& tensor) {
  if (static_cast<std::size_t>(coeffs.size()) != eq.coefficient_count())
    throw ShapeError("coefficient count does not match equation");
  tensor(eq.target, 0, eq.target) = coeffs(0);
  tensor(eq.target, 1, eq.target) = coeffs(1);
  for (std::size_t i = 0; i < eq.regressors.size(); ++i)
    tensor(eq.target, 0, eq.regressors[i].channel) = coeffs(static_cast<Eigen::Index>(i + 2));
}

/// Boolean support of the system: true where an equation owns a coefficient.
inline SystemTensor support_mask(const GomSystem& system) {
  SystemTensor mask(system.topology.channel_count());
  for (const auto& eq : system.equations)
    scatter_equation(eq, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(eq.coefficient_count())), mask);
  return mask;
}

/// Matrix form: Y_i = sum_w sum_k A(i,w,k) * s_w * X(w,k) with s = (1, -1),
/// X rows (P(t-1), P(t-2)).
inline Eigen::RowVectorXd eval_system_matrix(const SystemTensor& a, const Eigen::Matrix<double, 2, Eigen::Dynamic>& x) {
  const std::size_t n = a.size();
  if (static_cast<std::size_t>(x.cols()) != n)
    throw ShapeError("lag matrix has " + std::to_string(x.cols()) + " columns, tensor expects " + std::to_string(n));
  Eigen::RowVectorXd y(static_cast<Eigen::Index>(n));
  const auto data = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::RowVectorXd> lag1(data.data() + (i * 2) * n, static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::RowVectorXd> lag2(data.data() + (i * 2 + 1) * n, static_cast<Eigen::Index>(n));
    y(static_cast<Eigen::Index>(i)) = lag1.dot(x.row(0)) - lag2.dot(x.row(1));
  }
  return y;
}

} // namespace gomkit
