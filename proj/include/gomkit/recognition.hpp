#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gomkit/diagnostics.hpp"
#include "gomkit/error.hpp"
#include "gomkit/motion.hpp"
#include "gomkit/random.hpp"

namespace gomkit {

inline constexpr double kVarianceFloor = 1e-6;

/// Per-channel z-scoring fitted on training frames.
struct FeatureScaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

/// Columns `channels` of a sequence, as a frames x channels matrix.
inline Eigen::MatrixXd select_channels(const PostureSequence& seq, std::span<const std::size_t> channels) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(seq.length()), static_cast<Eigen::Index>(channels.size()));
  for (std::size_t d = 0; d < channels.size(); ++d) {
    if (channels[d] >= seq.channel_count())
      throw NotFoundError("channel index " + std::to_string(channels[d]) + " is missing from the sequence");
    out.col(static_cast<Eigen::Index>(d)) = seq.frames().col(static_cast<Eigen::Index>(channels[d]));
  }
  return out;
}

inline FeatureScaler fit_scaler(std::span<const Eigen::MatrixXd> features) {
  if (features.empty()) throw ValidationError("no training sequences for the feature scaler");
  const auto d = features.front().cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d), sq = Eigen::RowVectorXd::Zero(d);
  double count = 0.0;
  for (const auto& f : features) {
    sum += f.colwise().sum();
    count += static_cast<double>(f.rows());
  }
  FeatureScaler s;
  s.mean = sum / count;
  for (const auto& f : features) sq += (f.rowwise() - s.mean).array().square().matrix().colwise().sum();
  s.scale = (sq / count).cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
  return s;
}

/// Left-to-right HMM with diagonal Gaussian emissions over a channel subset.
/// Emission parameters live in the scaler's z-scored space.
struct HmmModel {
  std::string label;
  std::vector<std::size_t> channels;
  FeatureScaler scaler;
  Eigen::VectorXd initial;    // S, mass on the first state
  Eigen::MatrixXd transition; // S x S, non-zero only on the diagonal and first superdiagonal
  Eigen::MatrixXd means;      // S x D
  Eigen::MatrixXd variances;  // S x D
  std::vector<double> training_loglik; // total log-likelihood before each re-estimation

  std::size_t states() const { return static_cast<std::size_t>(transition.rows()); }

  /// Emission means mapped back to the original channel units.
  Eigen::MatrixXd original_means() const {
    return (means.array().rowwise() * scaler.scale.array()).rowwise() + scaler.mean.array();
  }
};

namespace detail {

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// T x S emission log-densities of z-scored features.
inline Eigen::MatrixXd emission_logpdf(const HmmModel& model, const Eigen::MatrixXd& z) {
  constexpr double log_2pi = 1.8378770664093454836;
  const auto s_count = model.means.rows();
  Eigen::MatrixXd out(z.rows(), s_count);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    const Eigen::RowVectorXd mu = model.means.row(s);
    const Eigen::RowVectorXd var = model.variances.row(s);
    const double norm = -0.5 * (static_cast<double>(z.cols()) * log_2pi + var.array().log().sum());
    for (Eigen::Index t = 0; t < z.rows(); ++t)
      out(t, s) = norm - 0.5 * ((z.row(t) - mu).array().square() / var.array()).sum();
  }
  return out;
}

inline Eigen::MatrixXd log_matrix(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); });
}

/// Forward pass in log space; returns log P(sequence) and fills log-alpha.
inline double forward(const Eigen::MatrixXd& log_b, const Eigen::VectorXd& log_pi, const Eigen::MatrixXd& log_a,
                      Eigen::MatrixXd& log_alpha) {
  const auto t_count = log_b.rows(), s_count = log_b.cols();
  log_alpha.resize(t_count, s_count);
  for (Eigen::Index s = 0; s < s_count; ++s) log_alpha(0, s) = log_pi(s) + log_b(0, s);
  for (Eigen::Index t = 1; t < t_count; ++t)
    for (Eigen::Index j = 0; j < s_count; ++j) {
      double acc = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < s_count; ++i) acc = log_sum_exp(acc, log_alpha(t - 1, i) + log_a(i, j));
      log_alpha(t, j) = acc + log_b(t, j);
    }
  double total = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < s_count; ++s) total = log_sum_exp(total, log_alpha(t_count - 1, s));
  return total;
}

inline void backward(const Eigen::MatrixXd& log_b, const Eigen::MatrixXd& log_a, Eigen::MatrixXd& log_beta) {
  const auto t_count = log_b.rows(), s_count = log_b.cols();
  log_beta.resize(t_count, s_count);
  log_beta.row(t_count - 1).setZero();
  for (Eigen::Index t = t_count - 2; t >= 0; --t)
    for (Eigen::Index i = 0; i < s_count; ++i) {
      double acc = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < s_count; ++j)
        acc = log_sum_exp(acc, log_a(i, j) + log_b(t + 1, j) + log_beta(t + 1, j));
      log_beta(t, i) = acc;
    }
}

inline void enforce_left_to_right(Eigen::MatrixXd& a) {
  const auto s = a.rows();
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      if (j != i && j != i + 1) a(i, j) = 0.0;
}

} // namespace detail

/// Log-likelihood of a channel-restricted, unscaled feature matrix.
inline double hmm_log_likelihood(const HmmModel& model, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd z = model.scaler.apply(features);
  Eigen::MatrixXd log_alpha;
  return detail::forward(detail::emission_logpdf(model, z), detail::log_matrix(model.initial),
                         detail::log_matrix(model.transition), log_alpha);
}

inline double hmm_log_likelihood(const HmmModel& model, const PostureSequence& seq) {
  return hmm_log_likelihood(model, select_channels(seq, model.channels));
}

struct HmmTrainOptions {
  std::size_t max_iters = 200;
  double tolerance = 1e-4; // on the per-frame log-likelihood gain
  double variance_floor = kVarianceFloor;
};

/// Baum-Welch on unscaled feature matrices, initialised by uniform temporal
/// segmentation of every sequence into S blocks.
inline HmmModel train_hmm_features(std::span<const Eigen::MatrixXd> features, const FeatureScaler& scaler,
                                   std::size_t states, const HmmTrainOptions& opt = {}) {
  if (features.empty()) throw ValidationError("no training sequences for the HMM");
  if (states == 0) throw ValidationError("HMM needs at least one state");
  const auto s_count = static_cast<Eigen::Index>(states);
  const auto d = features.front().cols();
  std::vector<Eigen::MatrixXd> z;
  double total_frames = 0.0;
  for (const auto& f : features) {
    if (f.cols() != d) throw ShapeError("training sequences have different channel counts");
    if (f.rows() < s_count) throw ValidationError("every training sequence must be at least as long as the state count");
    z.push_back(scaler.apply(f));
    total_frames += static_cast<double>(f.rows());
  }

  HmmModel model;
  model.scaler = scaler;
  model.initial = Eigen::VectorXd::Zero(s_count);
  model.initial(0) = 1.0;
  model.means = Eigen::MatrixXd::Zero(s_count, d);
  model.variances = Eigen::MatrixXd::Zero(s_count, d);

  // Uniform segmentation.
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(s_count);
  for (const auto& zs : z) {
    const auto t_count = zs.rows();
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const Eigen::Index s = std::min<Eigen::Index>(t * s_count / t_count, s_count - 1);
      model.means.row(s) += zs.row(t);
      counts(s) += 1.0;
    }
  }
  for (Eigen::Index s = 0; s < s_count; ++s) model.means.row(s) /= counts(s);
  for (const auto& zs : z) {
    const auto t_count = zs.rows();
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const Eigen::Index s = std::min<Eigen::Index>(t * s_count / t_count, s_count - 1);
      model.variances.row(s) += (zs.row(t) - model.means.row(s)).array().square().matrix();
    }
  }
  bool floored = false;
  for (Eigen::Index s = 0; s < s_count; ++s) {
    model.variances.row(s) /= counts(s);
    for (Eigen::Index k = 0; k < d; ++k)
      if (model.variances(s, k) < opt.variance_floor) {
        model.variances(s, k) = opt.variance_floor;
        floored = true;
      }
  }
  const double block = total_frames / static_cast<double>(features.size()) / static_cast<double>(s_count);
  model.transition = Eigen::MatrixXd::Zero(s_count, s_count);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    if (s + 1 < s_count) {
      const double stay = std::clamp(1.0 - 1.0 / block, 0.0, 1.0 - 1e-6);
      model.transition(s, s) = stay;
      model.transition(s, s + 1) = 1.0 - stay;
    } else {
      model.transition(s, s) = 1.0;
    }
  }

  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opt.max_iters; ++iter) {
    const Eigen::VectorXd log_pi = detail::log_matrix(model.initial);
    const Eigen::MatrixXd log_a = detail::log_matrix(model.transition);
    Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(s_count, s_count);
    Eigen::VectorXd gamma_sum = Eigen::VectorXd::Zero(s_count);
    Eigen::MatrixXd mean_acc = Eigen::MatrixXd::Zero(s_count, d);
    std::vector<Eigen::MatrixXd> gammas;
    double total = 0.0;
    for (const auto& zs : z) {
      const Eigen::MatrixXd log_b = detail::emission_logpdf(model, zs);
      Eigen::MatrixXd log_alpha, log_beta;
      const double ll = detail::forward(log_b, log_pi, log_a, log_alpha);
      if (!std::isfinite(ll)) throw NumericalError("HMM training produced a non-finite likelihood");
      detail::backward(log_b, log_a, log_beta);
      total += ll;
      Eigen::MatrixXd gamma = (log_alpha + log_beta).array() - ll;
      gamma = gamma.array().exp();
      for (Eigen::Index t = 0; t + 1 < zs.rows(); ++t)
        for (Eigen::Index i = 0; i < s_count; ++i)
          for (Eigen::Index j = i; j <= std::min(i + 1, s_count - 1); ++j)
            xi_sum(i, j) += std::exp(log_alpha(t, i) + log_a(i, j) + log_b(t + 1, j) + log_beta(t + 1, j) - ll);
      gamma_sum += gamma.colwise().sum().transpose();
      mean_acc += gamma.transpose() * zs;
      gammas.push_back(std::move(gamma));
    }
    model.training_loglik.push_back(total);
    if (iter > 0 && (total - previous) / total_frames < opt.tolerance) break;
    previous = total;

    // M-step.
    for (Eigen::Index i = 0; i < s_count; ++i) {
      const double row = xi_sum.row(i).sum();
      if (row > 0.0) model.transition.row(i) = xi_sum.row(i) / row;
    }
    detail::enforce_left_to_right(model.transition);
    for (Eigen::Index s = 0; s < s_count; ++s) {
      if (gamma_sum(s) <= 0.0) continue;
      model.means.row(s) = mean_acc.row(s) / gamma_sum(s);
    }
    Eigen::MatrixXd var_acc = Eigen::MatrixXd::Zero(s_count, d);
    for (std::size_t n = 0; n < z.size(); ++n)
      for (Eigen::Index s = 0; s < s_count; ++s) {
        const Eigen::MatrixXd centered = z[n].rowwise() - model.means.row(s);
        var_acc.row(s) += gammas[n].col(s).transpose() * centered.array().square().matrix();
      }
    for (Eigen::Index s = 0; s < s_count; ++s) {
      if (gamma_sum(s) <= 0.0) continue;
      for (Eigen::Index k = 0; k < d; ++k) {
        double v = var_acc(s, k) / gamma_sum(s);
        if (v < opt.variance_floor) {
          v = opt.variance_floor;
          floored = true;
        }
        model.variances(s, k) = v;
      }
    }
  }
  if (floored) warn("HMM emission variance floored at " + std::to_string(opt.variance_floor));
  return model;
}

/// Trains the class model on the given channels. When `scaler` is absent,
/// z-scoring statistics come from every sequence of the dataset.
inline HmmModel train_hmm(const MovementDataset& dataset, const std::string& class_label,
                          std::span<const std::size_t> channels, std::size_t states,
                          const FeatureScaler* scaler = nullptr, const HmmTrainOptions& opt = {}) {
  if (channels.empty()) throw ValidationError("channel subset is empty");
  const auto idx = dataset.indices_of(class_label);
  if (idx.empty()) throw NotFoundError("unknown class '" + class_label + "'");
  std::vector<Eigen::MatrixXd> feats;
  for (auto i : idx) feats.push_back(select_channels(dataset[i], channels));
  FeatureScaler own;
  if (!scaler) {
    std::vector<Eigen::MatrixXd> all;
    for (const auto& s : dataset.sequences()) all.push_back(select_channels(s, channels));
    own = fit_scaler(all);
    scaler = &own;
  }
  auto model = train_hmm_features(feats, *scaler, states, opt);
  model.label = class_label;
  model.channels.assign(channels.begin(), channels.end());
  return model;
}

/// Draws a sequence (original units) from the model's generative process.
inline Eigen::MatrixXd sample_hmm(const HmmModel& model, std::size_t length, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto d = model.means.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(length), d);
  Eigen::Index s = 0;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      double u = uniform(rng), acc = 0.0;
      Eigen::Index next = s;
      for (Eigen::Index j = 0; j < model.transition.cols(); ++j) {
        acc += model.transition(s, j);
        if (u < acc) {
          next = j;
          break;
        }
      }
      s = next;
    }
    for (Eigen::Index k = 0; k < d; ++k)
      out(static_cast<Eigen::Index>(t), k) =
          (model.means(s, k) + std::sqrt(model.variances(s, k)) * normal(rng)) * model.scaler.scale(k) +
          model.scaler.mean(k);
  }
  return out;
}

/// Index of the model with the highest forward log-likelihood; lowest index on ties.
inline std::size_t classify_index(const Eigen::MatrixXd& features, std::span<const HmmModel> models) {
  if (models.empty()) throw ValidationError("no models to classify against");
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double ll = hmm_log_likelihood(models[m], features);
    if (ll > best_ll) {
      best_ll = ll;
      best = m;
    }
  }
  return best;
}

inline std::string classify(const PostureSequence& seq, std::span<const HmmModel> models,
                            std::span<const std::size_t> channels) {
  if (models.empty()) throw ValidationError("no models to classify against");
  for (const auto& m : models)
    if (!std::equal(m.channels.begin(), m.channels.end(), channels.begin(), channels.end()))
      throw ValidationError("model '" + m.label + "' was trained on a different channel subset");
  return models[classify_index(select_channels(seq, channels), models)].label;
}

struct ClassScores {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct RecognitionReport {
  std::vector<std::string> labels;
  Eigen::MatrixXi confusion; // rows: true class, columns: predicted class
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;
  std::size_t folds = 0;
};

/// Macro-averaged F1 from a confusion matrix (rows true, columns predicted).
/// Undefined precision or recall counts as 0.
inline std::vector<ClassScores> class_scores(const Eigen::MatrixXi& confusion) {
  std::vector<ClassScores> out;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    ClassScores s;
    const double tp = confusion(c, c);
    const double predicted = confusion.col(c).sum();
    const double actual = confusion.row(c).sum();
    s.support = static_cast<std::size_t>(actual);
    s.precision = predicted > 0 ? tp / predicted : 0.0;
    s.recall = actual > 0 ? tp / actual : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    out.push_back(s);
  }
  return out;
}

inline double macro_f1(const Eigen::MatrixXi& confusion) {
  const auto scores = class_scores(confusion);
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  return scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
}

/// Stratified k-fold evaluation of per-class left-to-right HMMs on a channel
/// subset. Falls back to leave-one-out when a class has fewer than `folds`
/// samples. Z-scoring statistics come from each training fold.
inline RecognitionReport evaluate_f1(const MovementDataset& dataset, std::span<const std::size_t> channels,
                                     std::size_t states, std::size_t folds, std::uint64_t seed,
                                     const HmmTrainOptions& opt = {}) {
  const auto labels = dataset.class_labels();
  if (labels.size() < 2) throw ValidationError("recognition needs at least two classes");
  if (channels.empty()) throw ValidationError("channel subset is empty");
  if (folds < 2) throw ValidationError("folds must be at least 2");

  bool leave_one_out = false;
  for (const auto& l : labels)
    if (dataset.indices_of(l).size() < folds) leave_one_out = true;

  std::vector<std::size_t> fold_of(dataset.size(), 0);
  std::size_t fold_count = folds;
  if (leave_one_out) {
    fold_count = dataset.size();
    std::iota(fold_of.begin(), fold_of.end(), 0);
  } else {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      auto idx = dataset.indices_of(labels[c]);
      Rng rng(derive_seed(seed, {c}));
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = k % folds;
    }
  }

  RecognitionReport report;
  report.labels = labels;
  report.folds = fold_count;
  report.confusion = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(labels.size()),
                                           static_cast<Eigen::Index>(labels.size()));
  std::vector<Eigen::MatrixXd> features;
  for (const auto& s : dataset.sequences()) features.push_back(select_channels(s, channels));

  for (std::size_t f = 0; f < fold_count; ++f) {
    std::vector<Eigen::MatrixXd> train_all;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (fold_of[i] != f) train_all.push_back(features[i]);
    if (train_all.empty()) continue;
    const auto scaler = fit_scaler(train_all);
    std::vector<HmmModel> models;
    for (const auto& label : labels) {
      std::vector<Eigen::MatrixXd> cls;
      for (std::size_t i = 0; i < dataset.size(); ++i)
        if (fold_of[i] != f && dataset[i].class_label() == label) cls.push_back(features[i]);
      if (cls.empty()) throw ValidationError("class '" + label + "' has no training samples in a fold");
      auto m = train_hmm_features(cls, scaler, states, opt);
      m.label = label;
      m.channels.assign(channels.begin(), channels.end());
      models.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (fold_of[i] != f) continue;
      const auto truth = static_cast<Eigen::Index>(
          std::find(labels.begin(), labels.end(), dataset[i].class_label()) - labels.begin());
      const auto predicted = static_cast<Eigen::Index>(classify_index(features[i], models));
      ++report.confusion(truth, predicted);
    }
  }
  report.per_class = class_scores(report.confusion);
  for (std::size_t c = 0; c < labels.size(); ++c) report.per_class[c].label = labels[c];
  report.macro_f1 = macro_f1(report.confusion);
  return report;
}

} // namespace gomkit
