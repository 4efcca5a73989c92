#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gomkit/error.hpp"
#include "gomkit/motion.hpp"
#include "gomkit/parallel.hpp"

namespace gomkit {

/// One (i, j) pair of a warping path: frame i of the first sequence matched
/// with frame j of the second.
using WarpStep = std::pair<std::size_t, std::size_t>;

struct DtwResult {
  double cost = 0.0;
  std::vector<WarpStep> path; // from (0,0) to (Ta-1,Tb-1)
};

namespace detail {

inline double frame_distance(const FrameMatrix& a, Eigen::Index i, const FrameMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).norm();
}

/// Accumulated-cost lattice of the three-neighbour recurrence with unit weights.
inline Eigen::MatrixXd dtw_lattice(const FrameMatrix& a, const FrameMatrix& b) {
  const Eigen::Index n = a.rows(), m = b.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(n, m, inf);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = frame_distance(a, i, b, j);
      if (i == 0 && j == 0) {
        acc(i, j) = d;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = acc(i - 1, j - 1);
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = d + best;
    }
  }
  return acc;
}

} // namespace detail

/// Full DTW with backtracked path. Ties prefer the diagonal move, then the
/// move that advances the first sequence.
inline DtwResult dtw_align(const PostureSequence& a, const PostureSequence& b) {
  require_same_channels(a, b);
  const auto acc = detail::dtw_lattice(a.frames(), b.frames());
  DtwResult result;
  Eigen::Index i = acc.rows() - 1, j = acc.cols() - 1;
  result.cost = acc(i, j);
  result.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    result.path.emplace_back(i, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

/// DTW cost with per-frame Euclidean distance over all channels.
inline double dtw_distance(const PostureSequence& a, const PostureSequence& b) {
  require_same_channels(a, b);
  const auto acc = detail::dtw_lattice(a.frames(), b.frames());
  return acc(acc.rows() - 1, acc.cols() - 1);
}

/// Symmetric pairwise DTW matrix; the upper triangle is computed in parallel.
inline Eigen::MatrixXd pairwise_dtw(const std::vector<const PostureSequence*>& seqs,
                                    std::size_t workers = default_worker_count()) {
  const std::size_t n = seqs.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t k) {
    values[k] = dtw_distance(*seqs[pairs[k].first], *seqs[pairs[k].second]);
  });
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[k];
    d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = values[k];
  }
  return d;
}

/// Index (into `indices`) of the medoid: minimal summed distance, lowest index on ties.
inline std::size_t medoid_index(const Eigen::MatrixXd& distances) {
  std::size_t best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < distances.rows(); ++i) {
    const double s = distances.row(i).sum();
    if (s < best_sum) {
      best_sum = s;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

/// Dataset index of the class medoid under DTW.
inline std::size_t select_reference_index(const MovementDataset& dataset, const std::string& class_label,
                                          std::size_t workers = default_worker_count()) {
  const auto idx = dataset.indices_of(class_label);
  if (idx.empty()) throw NotFoundError("unknown class '" + class_label + "'");
  if (idx.size() == 1) return idx.front();
  std::vector<const PostureSequence*> seqs;
  for (auto i : idx) seqs.push_back(&dataset[i]);
  return idx[medoid_index(pairwise_dtw(seqs, workers))];
}

inline PostureSequence select_reference(const MovementDataset& dataset, const std::string& class_label,
                                        std::size_t workers = default_worker_count()) {
  return dataset[select_reference_index(dataset, class_label, workers)];
}

/// Warps `seq` onto the template's time axis. Template frames matched to
/// several `seq` frames receive their arithmetic mean.
inline PostureSequence align_to_template(const PostureSequence& seq, const PostureSequence& templ) {
  require_same_channels(seq, templ);
  const auto result = dtw_align(templ, seq);
  FrameMatrix out = FrameMatrix::Zero(templ.frames().rows(), templ.frames().cols());
  std::vector<std::size_t> counts(templ.length(), 0);
  for (const auto& [i, j] : result.path) {
    out.row(static_cast<Eigen::Index>(i)) += seq.frame(j);
    ++counts[i];
  }
  for (std::size_t i = 0; i < counts.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(counts[i]);
  return PostureSequence(std::move(out), seq.channel_names(), templ.frame_rate_hz(), seq.class_label(),
                         seq.subject_id());
}

} // namespace gomkit
