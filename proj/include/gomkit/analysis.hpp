#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gomkit/diagnostics.hpp"
#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/kf_trainer.hpp"
#include "gomkit/topology.hpp"

namespace gomkit {

inline constexpr double kSignificanceLevel = 0.05;

/// Two-sided p-value of H0: coefficient = 0 under the Gaussian posterior.
inline double two_sided_p_value(double mean, double variance) {
  if (variance <= 0.0) return mean == 0.0 ? 1.0 : 0.0;
  const double z = std::abs(mean) / std::sqrt(variance);
  return std::erfc(z / std::numbers::sqrt2);
}

struct CoefficientSignificance {
  std::size_t slot = 0;
  Assumption assumption = Assumption::Transition;
  std::size_t channel = 0; // regressor channel; the target itself for the two lag slots
  Eigen::VectorXd p_values;
  double fraction_significant = 0.0;
  bool significant = false;
};

struct EquationSignificance {
  std::size_t target = 0;
  std::vector<CoefficientSignificance> coefficients;
};

struct SignificanceOptions {
  double level = kSignificanceLevel;
  double majority = 0.5; // significant iff the rejected fraction of time steps exceeds this
};

/// Per-timestep z-test of every coefficient slot against zero.
inline EquationSignificance coefficient_ttest(const TrainedEquation& trained, const SignificanceOptions& opt = {}) {
  const auto& tr = trained.trajectory;
  tr.validate();
  if (tr.coefficient_count() != trained.equation.coefficient_count())
    throw ShapeError("trajectory width does not match the equation");
  EquationSignificance out;
  out.target = trained.equation.target;
  bool degenerate = false;
  for (std::size_t slot = 0; slot < tr.coefficient_count(); ++slot) {
    CoefficientSignificance cs;
    cs.slot = slot;
    cs.assumption = trained.equation.assumption_of_slot(slot);
    cs.channel = slot < 2 ? trained.equation.target : trained.equation.regressors[slot - 2].channel;
    cs.p_values.resize(static_cast<Eigen::Index>(tr.steps()));
    std::size_t rejected = 0;
    for (std::size_t k = 0; k < tr.steps(); ++k) {
      const auto i = static_cast<Eigen::Index>(k), j = static_cast<Eigen::Index>(slot);
      const double mean = tr.mean(i, j), var = tr.variance(i, j);
      if (var <= 0.0 && mean != 0.0) degenerate = true;
      const double p = two_sided_p_value(mean, var);
      cs.p_values(i) = p;
      if (p < opt.level) ++rejected;
    }
    cs.fraction_significant = tr.steps() ? static_cast<double>(rejected) / static_cast<double>(tr.steps()) : 0.0;
    cs.significant = cs.fraction_significant > opt.majority;
    out.coefficients.push_back(std::move(cs));
  }
  if (degenerate)
    warn("equation " + std::to_string(out.target) + ": zero posterior variance with non-zero mean, p set to 0");
  return out;
}

inline std::vector<EquationSignificance> significance_report(std::span<const TrainedEquation> trained,
                                                             const SignificanceOptions& opt = {}) {
  std::vector<EquationSignificance> out;
  out.reserve(trained.size());
  for (const auto& t : trained) out.push_back(coefficient_ttest(t, opt));
  return out;
}

struct SensorRanking {
  std::vector<std::size_t> counts;             // per channel
  std::vector<std::size_t> selected_channels;  // channel order
  std::vector<std::size_t> selected_joints;    // joint order
  std::size_t top_k = 0;
  std::size_t threshold = 0; // minimum count of a selected channel
};

inline constexpr std::size_t kDefaultTopKChannels = 12;

/// Tallies significant regressor slots per channel (own-lag slots are not
/// sensors of other equations and are left out), keeps the top_k channels
/// with ties at the cut all included, and expands them to whole joints.
inline SensorRanking rank_and_select(std::span<const EquationSignificance> reports, const SkeletonTopology& topology,
                                     std::size_t top_k = kDefaultTopKChannels) {
  if (reports.empty()) throw ValidationError("no significance reports to rank");
  if (top_k == 0) throw ValidationError("top_k must be positive");
  const std::size_t n = topology.channel_count();
  SensorRanking out;
  out.top_k = top_k;
  out.counts.assign(n, 0);
  for (const auto& eq : reports)
    for (const auto& c : eq.coefficients) {
      if (c.assumption == Assumption::Transition || !c.significant) continue;
      if (c.channel >= n) throw ShapeError("report references a channel outside the topology");
      ++out.counts[c.channel];
    }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.counts[a] > out.counts[b]; });
  std::size_t threshold = out.counts[order[std::min(top_k, n) - 1]];
  if (threshold == 0 && out.counts[order[0]] > 0) threshold = 1;
  out.threshold = threshold;
  for (std::size_t c = 0; c < n; ++c)
    if (out.counts[c] >= threshold) out.selected_channels.push_back(c);

  std::set<std::size_t> joints;
  for (auto c : out.selected_channels) joints.insert(SkeletonTopology::joint_of_channel(c));
  out.selected_joints.assign(joints.begin(), joints.end());
  return out;
}

/// Every channel of the given joints, in channel order.
inline std::vector<std::size_t> channels_of_joints(std::span<const std::size_t> joints) {
  std::vector<std::size_t> out;
  for (auto j : joints)
    for (Axis a : kAxes) out.push_back(SkeletonTopology::channel(j, a));
  std::sort(out.begin(), out.end());
  return out;
}

/// Per-time-step mean +/- k standard deviations of aligned repetitions'
/// coefficients, population (divisor R) standard deviation.
struct ToleranceBand {
  std::size_t target = 0;
  double k_sigma = 2.0;
  std::size_t repetitions = 0;
  Eigen::MatrixXd mean;   // steps x coefficients
  Eigen::MatrixXd stddev;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
};

inline ToleranceBand tolerance_intervals(std::span<const CoefficientTrajectory> reps, double k_sigma) {
  if (reps.empty()) throw ValidationError("tolerance intervals need at least one repetition");
  if (!(k_sigma >= 0.0)) throw ValidationError("k_sigma must be non-negative");
  const auto rows = reps.front().mean.rows(), cols = reps.front().mean.cols();
  for (const auto& r : reps)
    if (r.mean.rows() != rows || r.mean.cols() != cols)
      throw ShapeError("repetition trajectories have mismatched lengths");
  const double count = static_cast<double>(reps.size());
  ToleranceBand band;
  band.target = reps.front().target;
  band.k_sigma = k_sigma;
  band.repetitions = reps.size();
  // Offsets from the first repetition, so identical repetitions give exactly zero spread.
  Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& r : reps) shift += r.mean - reps.front().mean;
  band.mean = reps.front().mean + shift / count;
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& r : reps) ss += (r.mean - band.mean).cwiseAbs2();
  band.stddev = (ss / count).cwiseSqrt();
  band.lower = band.mean - k_sigma * band.stddev;
  band.upper = band.mean + k_sigma * band.stddev;
  return band;
}

inline ToleranceBand tolerance_intervals(std::span<const TrainedEquation> reps, double k_sigma) {
  std::vector<CoefficientTrajectory> trs;
  trs.reserve(reps.size());
  for (const auto& r : reps) {
    if (!(r.equation == reps.front().equation)) throw ShapeError("repetitions belong to different equations");
    trs.push_back(r.trajectory);
  }
  return tolerance_intervals(std::span<const CoefficientTrajectory>(trs), k_sigma);
}

// JSON views used by the CLI.

inline nlohmann::json to_json(const EquationSignificance& eq, const SkeletonTopology& topology) {
  nlohmann::json j;
  j["target"] = topology.channel_name(eq.target);
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : eq.coefficients) {
    j["coefficients"].push_back({{"slot", c.slot},
                                 {"assumption", std::string(assumption_tag(c.assumption))},
                                 {"channel", topology.channel_name(c.channel)},
                                 {"fraction_significant", c.fraction_significant},
                                 {"significant", c.significant}});
  }
  return j;
}

inline std::vector<EquationSignificance> significance_from_json(const nlohmann::json& j, const SkeletonTopology& topology) {
  std::vector<EquationSignificance> out;
  try {
    for (const auto& je : j.at("equations")) {
      EquationSignificance eq;
      eq.target = topology.channel_index(je.at("target").get<std::string>());
      for (const auto& jc : je.at("coefficients")) {
        CoefficientSignificance c;
        c.slot = jc.at("slot").get<std::size_t>();
        c.assumption = parse_assumption_tag(jc.at("assumption").get<std::string>());
        c.channel = topology.channel_index(jc.at("channel").get<std::string>());
        c.fraction_significant = jc.at("fraction_significant").get<double>();
        c.significant = jc.at("significant").get<bool>();
        eq.coefficients.push_back(std::move(c));
      }
      out.push_back(std::move(eq));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed significance report: ") + e.what());
  }
  return out;
}

} // namespace gomkit
