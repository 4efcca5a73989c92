#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/motion.hpp"

namespace gomkit {

/// Filter tuning parameters: random-walk variance of the coefficients
/// (one shared value, or one per coefficient) and observation variance.
struct KfTheta {
  Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 1e-4);
  double r = 1.0;

  static KfTheta shared(double q, double r) {
    KfTheta t;
    t.q = Eigen::VectorXd::Constant(1, q);
    t.r = r;
    return t;
  }
};

struct OptimizerConfig {
  std::size_t max_iters = 400;
  double tolerance = 1e-7;
  std::size_t restarts = 2;
  std::uint64_t seed = 0;
};

struct KfConfig {
  double init_coeff_var = 10.0;
  /// Prior mean of the coefficients; empty means a1 = 1, everything else 0.
  std::optional<Eigen::VectorXd> init_coeff_mean;
  bool per_coefficient_q = false;
  OptimizerConfig optimizer;
  // Search box for the maximum-likelihood fit.
  double q_min = 1e-12, q_max = 1e2;
  double r_min = 1e-10, r_max = 1e6;

  void validate() const {
    if (!(init_coeff_var > 0.0)) throw ValidationError("init_coeff_var must be positive");
    if (!(optimizer.tolerance > 0.0)) throw ValidationError("optimizer tolerance must be positive");
    if (!(q_min > 0.0 && q_min < q_max && r_min > 0.0 && r_min < r_max))
      throw ValidationError("invalid variance bounds");
  }
};

/// Filter/smoother output for one equation on one sequence.
struct KfOutput {
  double loglik = 0.0;
  CoefficientTrajectory filtered;
  CoefficientTrajectory smoothed;        // empty unless smoothing was requested
  Eigen::VectorXd predictions;           // one-step predictions y_hat(t) from the predicted state
  Eigen::VectorXd innovations;           // y(t) - y_hat(t)
  Eigen::VectorXd innovation_variances;  // S(t)
};

inline Eigen::VectorXd prior_mean(const GomEquation& eq, const KfConfig& config) {
  const auto m = static_cast<Eigen::Index>(eq.coefficient_count());
  if (config.init_coeff_mean) {
    if (config.init_coeff_mean->size() != m) throw ShapeError("init_coeff_mean has the wrong length");
    return *config.init_coeff_mean;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  mean(0) = 1.0;
  return mean;
}

/// Regressor rows H (steps x m) and targets y (steps) of an equation on a sequence.
inline void design_matrix(const GomEquation& eq, const PostureSequence& seq, Eigen::MatrixXd& h, Eigen::VectorXd& y) {
  if (seq.length() < kMinSequenceFrames) throw ValidationError("sequence needs at least 3 frames");
  if (eq.target >= seq.channel_count()) throw ShapeError("sequence does not cover the equation target");
  for (const auto& r : eq.regressors)
    if (r.channel >= seq.channel_count()) throw ShapeError("sequence does not cover every regressor channel");
  const auto steps = static_cast<Eigen::Index>(seq.length() - 2);
  const auto m = static_cast<Eigen::Index>(eq.coefficient_count());
  h.resize(steps, m);
  y.resize(steps);
  const auto& f = seq.frames();
  for (Eigen::Index k = 0; k < steps; ++k) {
    h.row(k) = regressor_row(eq, f.row(k + 1), f.row(k)).transpose();
    y(k) = f(k + 2, static_cast<Eigen::Index>(eq.target));
  }
}

/// Time-varying regression Kalman filter: the state is the coefficient
/// vector with random-walk dynamics, the observation row is the regressor
/// vector. Returns the Gaussian predictive log-likelihood and, when
/// `smooth` is set, the Rauch-Tung-Striebel smoothed trajectory.
inline KfOutput kf_filter(const GomEquation& eq, const PostureSequence& seq, const KfTheta& theta,
                          const KfConfig& config, bool smooth = true) {
  const auto m = static_cast<Eigen::Index>(eq.coefficient_count());
  if (!(theta.r > 0.0) || !std::isfinite(theta.r)) throw ValidationError("observation variance must be positive");
  if (theta.q.size() != 1 && theta.q.size() != m) throw ShapeError("process variance has the wrong length");
  for (Eigen::Index i = 0; i < theta.q.size(); ++i)
    if (!(theta.q(i) > 0.0) || !std::isfinite(theta.q(i))) throw ValidationError("process variance must be positive");

  Eigen::MatrixXd h;
  Eigen::VectorXd y;
  design_matrix(eq, seq, h, y);
  const Eigen::Index steps = h.rows();
  const Eigen::VectorXd qdiag = theta.q.size() == 1 ? Eigen::VectorXd::Constant(m, theta.q(0)) : theta.q;

  KfOutput out;
  out.predictions.resize(steps);
  out.innovations.resize(steps);
  out.innovation_variances.resize(steps);
  out.filtered.target = eq.target;
  out.filtered.mean.resize(steps, m);
  out.filtered.variance.resize(steps, m);

  std::vector<Eigen::VectorXd> pred_mean(static_cast<std::size_t>(steps)), filt_mean(static_cast<std::size_t>(steps));
  std::vector<Eigen::MatrixXd> pred_cov(static_cast<std::size_t>(steps)), filt_cov(static_cast<std::size_t>(steps));

  Eigen::VectorXd b = prior_mean(eq, config);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(m, m) * config.init_coeff_var;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  constexpr double log_2pi = 1.8378770664093454836;
  double loglik = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    if (k > 0) p.diagonal() += qdiag;
    const auto sk = static_cast<std::size_t>(k);
    pred_mean[sk] = b;
    pred_cov[sk] = p;

    const Eigen::VectorXd hk = h.row(k).transpose();
    const Eigen::VectorXd ph = p * hk;
    const double s = hk.dot(ph) + theta.r;
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericalError("singular innovation variance at step " + std::to_string(k));
    const double yhat = hk.dot(b);
    const double e = y(k) - yhat;
    const Eigen::VectorXd gain = ph / s;
    b += gain * e;
    // Joseph form keeps the covariance symmetric positive semi-definite.
    const Eigen::MatrixXd a = eye - gain * hk.transpose();
    p = a * p * a.transpose() + theta.r * gain * gain.transpose();
    p = 0.5 * (p + p.transpose());

    loglik += -0.5 * (log_2pi + std::log(s) + e * e / s);
    out.predictions(k) = yhat;
    out.innovations(k) = e;
    out.innovation_variances(k) = s;
    filt_mean[sk] = b;
    filt_cov[sk] = p;
    out.filtered.mean.row(k) = b.transpose();
    out.filtered.variance.row(k) = p.diagonal().cwiseMax(0.0).transpose();
  }
  if (!std::isfinite(loglik)) throw NumericalError("non-finite log-likelihood");
  out.loglik = loglik;

  if (smooth) {
    out.smoothed.target = eq.target;
    out.smoothed.mean.resize(steps, m);
    out.smoothed.variance.resize(steps, m);
    Eigen::VectorXd bs = filt_mean.back();
    Eigen::MatrixXd ps = filt_cov.back();
    out.smoothed.mean.row(steps - 1) = bs.transpose();
    out.smoothed.variance.row(steps - 1) = ps.diagonal().cwiseMax(0.0).transpose();
    for (Eigen::Index k = steps - 2; k >= 0; --k) {
      const auto sk = static_cast<std::size_t>(k);
      const Eigen::MatrixXd& pp = pred_cov[sk + 1];
      Eigen::LDLT<Eigen::MatrixXd> ldlt(pp);
      if (ldlt.info() != Eigen::Success) throw NumericalError("smoother covariance factorisation failed");
      const Eigen::MatrixXd gain = ldlt.solve(filt_cov[sk]).transpose(); // P_f * P_pred^-1
      bs = filt_mean[sk] + gain * (bs - pred_mean[sk + 1]);
      ps = filt_cov[sk] + gain * (ps - pp) * gain.transpose();
      ps = 0.5 * (ps + ps.transpose());
      out.smoothed.mean.row(k) = bs.transpose();
      out.smoothed.variance.row(k) = ps.diagonal().cwiseMax(0.0).transpose();
    }
  }
  return out;
}

} // namespace gomkit
