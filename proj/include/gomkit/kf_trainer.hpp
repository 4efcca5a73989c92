#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gomkit/dtw.hpp"
#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/kalman.hpp"
#include "gomkit/motion.hpp"
#include "gomkit/nelder_mead.hpp"
#include "gomkit/parallel.hpp"
#include "gomkit/random.hpp"

namespace gomkit {

/// A fitted equation: smoothed coefficient trajectory plus the fit diagnostics.
struct TrainedEquation {
  GomEquation equation;
  CoefficientTrajectory trajectory;
  KfTheta theta;
  double loglik = 0.0;
  Eigen::VectorXd innovations;
  /// Best-so-far log-likelihood after each optimizer iteration, across restarts.
  std::vector<double> loglik_trace;
};

namespace detail {

inline KfTheta theta_from_log(const Eigen::VectorXd& p, const KfConfig& cfg) {
  const Eigen::Index nq = p.size() - 1;
  KfTheta t;
  t.q.resize(nq);
  for (Eigen::Index i = 0; i < nq; ++i)
    t.q(i) = std::exp(std::clamp(p(i), std::log(cfg.q_min), std::log(cfg.q_max)));
  t.r = std::exp(std::clamp(p(nq), std::log(cfg.r_min), std::log(cfg.r_max)));
  return t;
}

} // namespace detail

/// Maximum-likelihood fit of (q, r) by Nelder-Mead in log-parameter space,
/// followed by a smoothing pass at the optimum.
inline TrainedEquation mle_fit(const GomEquation& eq, const PostureSequence& seq, const KfConfig& config) {
  config.validate();
  const Eigen::Index nq = config.per_coefficient_q ? static_cast<Eigen::Index>(eq.coefficient_count()) : 1;

  // Observation variance starts from the spread of first differences of the target.
  const auto col = seq.frames().col(static_cast<Eigen::Index>(eq.target));
  const Eigen::VectorXd diff = col.tail(col.size() - 1) - col.head(col.size() - 1);
  const double dvar = (diff.array() - diff.mean()).square().mean();
  const double r0 = std::clamp(0.1 * dvar, config.r_min * 10.0, config.r_max / 10.0);
  Eigen::VectorXd start(nq + 1);
  start.head(nq).setConstant(std::log(1e-4));
  start(nq) = std::log(r0);

  auto objective = [&](const Eigen::VectorXd& p) {
    try {
      return -kf_filter(eq, seq, detail::theta_from_log(p, config), config, false).loglik;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  NelderMeadOptions nm;
  nm.max_iters = config.optimizer.max_iters;
  nm.f_tolerance = config.optimizer.tolerance;
  nm.x_tolerance = 1e-4;
  nm.initial_step = 2.0;

  Rng rng(derive_seed(config.optimizer.seed, {eq.target}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd best_x = start;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  for (std::size_t run = 0; run <= config.optimizer.restarts; ++run) {
    Eigen::VectorXd x0 = best_x;
    if (run > 0)
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += 2.0 * normal(rng);
    const auto res = nelder_mead(objective, x0, nm);
    if (res.value < best) {
      best = res.value;
      best_x = res.x;
    }
    for (double v : res.best_history) trace.push_back(trace.empty() ? -v : std::max(trace.back(), -v));
  }
  if (!std::isfinite(best))
    throw NumericalError("no finite log-likelihood for " + std::to_string(eq.target) + " after all restarts");

  TrainedEquation out;
  out.equation = eq;
  out.theta = detail::theta_from_log(best_x, config);
  const auto kf = kf_filter(eq, seq, out.theta, config, true);
  out.trajectory = kf.smoothed;
  out.loglik = kf.loglik;
  out.innovations = kf.innovations;
  out.loglik_trace = std::move(trace);
  return out;
}

/// Fits every equation of the system on one sequence. Equations run in
/// parallel; each derives its optimizer stream from the config seed and its
/// target channel, so results do not depend on scheduling.
inline std::vector<TrainedEquation> fit_sequence(const GomSystem& system, const PostureSequence& seq,
                                                 const KfConfig& config, std::size_t workers = default_worker_count()) {
  std::vector<TrainedEquation> out(system.size());
  parallel_for(system.size(), workers, [&](std::size_t i) { out[i] = mle_fit(system.equations[i], seq, config); });
  return out;
}

/// One-shot training: fit the class's DTW medoid.
inline std::vector<TrainedEquation> fit_reference(const GomSystem& system, const MovementDataset& dataset,
                                                  const std::string& class_label, const KfConfig& config,
                                                  std::size_t workers = default_worker_count()) {
  const auto& ref = dataset[select_reference_index(dataset, class_label, workers)];
  return fit_sequence(system, ref, config, workers);
}

} // namespace gomkit
