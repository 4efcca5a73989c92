#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/motion.hpp"

namespace gomkit {

inline constexpr double kDivergenceLimitDegrees = 1e4;

/// Closed-loop rollout of the system from two seed frames. Step k uses
/// trajectory row k (the last row is held once the trajectories run out).
/// Output has `length` frames, the first two being the seeds.
inline FrameMatrix generate_frames(const GomSystem& system, std::span<const CoefficientTrajectory> trajectories,
                                   const Eigen::RowVectorXd& seed0, const Eigen::RowVectorXd& seed1,
                                   std::size_t length) {
  const std::size_t n = system.size();
  if (trajectories.size() != n) throw ShapeError("need one coefficient trajectory per equation");
  if (static_cast<std::size_t>(seed0.size()) != n || static_cast<std::size_t>(seed1.size()) != n)
    throw ShapeError("seed frames do not match the channel set");
  if (length < 2) throw ValidationError("generation length must be at least 2");
  for (std::size_t i = 0; i < n; ++i) {
    if (trajectories[i].coefficient_count() != system.equations[i].coefficient_count())
      throw ShapeError("trajectory width does not match equation " + std::to_string(i));
    if (trajectories[i].steps() == 0) throw ShapeError("empty coefficient trajectory");
  }

  FrameMatrix out(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(n));
  out.row(0) = seed0;
  out.row(1) = seed1;
  SystemTensor tensor(n);
  Eigen::Matrix<double, 2, Eigen::Dynamic> lags(2, static_cast<Eigen::Index>(n));
  for (std::size_t t = 2; t < length; ++t) {
    const std::size_t k = t - 2;
    tensor.set_zero();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tr = trajectories[i];
      const auto row = static_cast<Eigen::Index>(std::min(k, tr.steps() - 1));
      scatter_equation(system.equations[i], tr.mean.row(row), tensor);
    }
    lags.row(0) = out.row(static_cast<Eigen::Index>(t - 1));
    lags.row(1) = out.row(static_cast<Eigen::Index>(t - 2));
    const Eigen::RowVectorXd y = eval_system_matrix(tensor, lags);
    for (Eigen::Index c = 0; c < y.size(); ++c)
      if (!std::isfinite(y(c)) || std::abs(y(c)) > kDivergenceLimitDegrees)
        throw NumericalError("generation diverged at frame " + std::to_string(t) + ", channel " +
                             system.topology.channel_name(static_cast<std::size_t>(c)));
    out.row(static_cast<Eigen::Index>(t)) = y;
  }
  return out;
}

inline PostureSequence generate(const GomSystem& system, std::span<const CoefficientTrajectory> trajectories,
                                const Eigen::RowVectorXd& seed0, const Eigen::RowVectorXd& seed1, std::size_t length,
                                double frame_rate_hz = kDefaultFrameRateHz) {
  if (length < kMinSequenceFrames) throw ValidationError("generation length must be at least 3");
  return PostureSequence(generate_frames(system, trajectories, seed0, seed1, length),
                         system.topology.channel_names(), frame_rate_hz);
}

struct ChannelMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double u1 = 0.0;
};

/// Generation quality: per-channel MAE, RMSE and Theil's U1 and their channel averages.
struct GenerationMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double u1 = 0.0;
  std::vector<ChannelMetrics> per_channel;
};

/// U1 = RMSE(y - y_hat) / (RMS(y) + RMS(y_hat)), bounded in [0, 1];
/// defined as 0 when both series are identically zero.
inline GenerationMetrics metrics(const FrameMatrix& generated, const FrameMatrix& truth) {
  if (generated.rows() != truth.rows() || generated.cols() != truth.cols())
    throw ShapeError("metrics need sequences of equal shape");
  if (generated.rows() == 0 || generated.cols() == 0) throw ShapeError("metrics need non-empty sequences");
  GenerationMetrics m;
  const auto frames = static_cast<double>(truth.rows());
  for (Eigen::Index c = 0; c < truth.cols(); ++c) {
    const Eigen::ArrayXd y = truth.col(c).array();
    const Eigen::ArrayXd yh = generated.col(c).array();
    ChannelMetrics cm;
    cm.mae = (y - yh).abs().sum() / frames;
    cm.rmse = std::sqrt((y - yh).square().sum() / frames);
    const double denom = std::sqrt(y.square().sum() / frames) + std::sqrt(yh.square().sum() / frames);
    cm.u1 = denom > 0.0 ? std::min(1.0, cm.rmse / denom) : 0.0;
    m.per_channel.push_back(cm);
    m.mae += cm.mae;
    m.rmse += cm.rmse;
    m.u1 += cm.u1;
  }
  const auto channels = static_cast<double>(truth.cols());
  m.mae /= channels;
  m.rmse /= channels;
  m.u1 /= channels;
  return m;
}

inline GenerationMetrics metrics(const PostureSequence& generated, const PostureSequence& truth) {
  require_same_channels(generated, truth);
  return metrics(generated.frames(), truth.frames());
}

} // namespace gomkit
