#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "gomkit/error.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/motion.hpp"
#include "gomkit/random.hpp"
#include "gomkit/text.hpp"

namespace gomkit {

/// Own-lag dynamics and initial frames of one channel. `*_end` values, when
/// present, ramp linearly from the start value over the sequence.
struct ChannelDynamics {
  double alpha1 = 1.0;
  double alpha2 = 0.0;
  std::optional<double> alpha1_end;
  std::optional<double> alpha2_end;
  double start0 = 0.0;
  double start1 = 0.0;

  /// Sinusoid A*r^t*sin(2*pi*f*t/fps + phase), expressed as an AR(2) recursion.
  static ChannelDynamics oscillator(double frequency_hz, double amplitude, double phase, double frame_rate_hz,
                                    double radius = 1.0) {
    const double w = 2.0 * std::numbers::pi * frequency_hz / frame_rate_hz;
    ChannelDynamics d;
    d.alpha1 = 2.0 * radius * std::cos(w);
    d.alpha2 = radius * radius;
    d.start0 = amplitude * std::sin(phase);
    d.start1 = radius * amplitude * std::sin(w + phase);
    return d;
  }
};

struct Coupling {
  std::size_t target = 0;
  std::size_t source = 0;
  double beta = 0.0;
  std::optional<double> beta_end;
};

struct SynthClass {
  std::string label;
  ChannelDynamics fallback; // channels not listed below
  std::map<std::size_t, ChannelDynamics> channels;
  std::vector<Coupling> couplings;
};

struct SynthSpec {
  SkeletonTopology topology = SkeletonTopology::default_body();
  std::vector<SynthClass> classes;
  std::size_t reps_per_class = 1;
  std::size_t length = 200;
  double noise_sigma = 0.0;
  double start_jitter = 0.0; // std-dev of a per-repetition offset added to both start frames
  double frame_rate_hz = kDefaultFrameRateHz;
};

struct SynthResult {
  MovementDataset dataset;
  /// Ground-truth coefficient trajectories per class, one per equation in
  /// channel order, laid out like the fitted trajectories (zero variance).
  std::map<std::string, std::vector<CoefficientTrajectory>> truth;
};

namespace detail {

inline double ramp(double start, const std::optional<double>& end, std::size_t k, std::size_t steps) {
  if (!end || steps < 2) return start;
  return start + (*end - start) * static_cast<double>(k) / static_cast<double>(steps - 1);
}

inline Eigen::MatrixXd companion(const std::vector<CoefficientTrajectory>& truth, const GomSystem& system,
                                 std::size_t step) {
  const auto n = static_cast<Eigen::Index>(system.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (const auto& eq : system.equations) {
    const auto row = truth[eq.target].mean.row(static_cast<Eigen::Index>(step));
    const auto i = static_cast<Eigen::Index>(eq.target);
    c(i, i) += row(0);
    c(i, n + i) -= row(1);
    for (std::size_t r = 0; r < eq.regressors.size(); ++r)
      c(i, static_cast<Eigen::Index>(eq.regressors[r].channel)) += row(static_cast<Eigen::Index>(r + 2));
  }
  c.bottomLeftCorner(n, n).setIdentity();
  return c;
}

} // namespace detail

inline double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Ground-truth coefficient trajectories of one class.
inline std::vector<CoefficientTrajectory> synth_truth(const SynthClass& cls, const GomSystem& system,
                                                      std::size_t length) {
  if (length < kMinSequenceFrames) throw ValidationError("synthetic length must be at least 3");
  const std::size_t steps = length - 2;
  std::vector<CoefficientTrajectory> truth;
  for (const auto& eq : system.equations) {
    const auto it = cls.channels.find(eq.target);
    const ChannelDynamics& dyn = it == cls.channels.end() ? cls.fallback : it->second;
    CoefficientTrajectory tr;
    tr.target = eq.target;
    const auto m = static_cast<Eigen::Index>(eq.coefficient_count());
    tr.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), m);
    tr.variance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps), m);
    for (std::size_t k = 0; k < steps; ++k) {
      tr.mean(static_cast<Eigen::Index>(k), 0) = detail::ramp(dyn.alpha1, dyn.alpha1_end, k, steps);
      tr.mean(static_cast<Eigen::Index>(k), 1) = detail::ramp(dyn.alpha2, dyn.alpha2_end, k, steps);
    }
    truth.push_back(std::move(tr));
  }
  for (const auto& cp : cls.couplings) {
    if (cp.target >= system.size() || cp.source >= system.size())
      throw ValidationError("coupling references an unknown channel");
    const auto& eq = system.equations[cp.target];
    std::optional<std::size_t> slot;
    for (std::size_t r = 0; r < eq.regressors.size(); ++r)
      if (eq.regressors[r].channel == cp.source) slot = r + 2;
    if (!slot)
      throw ValidationError("coupling " + system.topology.channel_name(cp.source) + " -> " +
                            system.topology.channel_name(cp.target) + " is not an assumption of the target equation");
    for (std::size_t k = 0; k < steps; ++k)
      truth[cp.target].mean(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(*slot)) =
          detail::ramp(cp.beta, cp.beta_end, k, steps);
  }
  return truth;
}

/// Rejects specs whose companion dynamics have spectral radius above one.
/// Radius exactly one is accepted so that pure oscillators and the identity
/// recursion remain expressible.
inline void check_stability(const std::vector<CoefficientTrajectory>& truth, const GomSystem& system,
                            const std::string& label) {
  const std::size_t steps = truth.front().steps();
  bool varying = false;
  for (const auto& tr : truth)
    if (steps > 1 && (tr.mean.row(0) - tr.mean.row(static_cast<Eigen::Index>(steps - 1))).cwiseAbs().maxCoeff() > 0.0)
      varying = true;
  std::vector<std::size_t> probe{0};
  if (varying) probe = {0, (steps - 1) / 2, steps - 1};
  for (auto k : probe) {
    const double rho = spectral_radius(detail::companion(truth, system, k));
    if (rho > 1.0 + 1e-9)
      throw ValidationError("class '" + label + "' is unstable: spectral radius " + text::format_double(rho) +
                            " at step " + std::to_string(k));
  }
}

/// Generates every class/repetition of the synthetic spec. Deterministic for a seed;
/// each repetition draws from its own derived stream.
inline SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.classes.empty()) throw ValidationError("synthetic spec has no classes");
  if (spec.reps_per_class == 0) throw ValidationError("reps_per_class must be positive");
  if (spec.noise_sigma < 0.0 || spec.start_jitter < 0.0) throw ValidationError("noise levels must be non-negative");
  const auto system = build_system(spec.topology);
  const auto names = spec.topology.channel_names();
  const std::size_t n = system.size();
  const std::size_t steps = spec.length - 2;

  SynthResult result;
  std::vector<PostureSequence> seqs;
  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const auto& cls = spec.classes[ci];
    if (result.truth.count(cls.label)) throw ValidationError("duplicate class label '" + cls.label + "'");
    auto truth = synth_truth(cls, system, spec.length);
    check_stability(truth, system, cls.label);

    for (std::size_t rep = 0; rep < spec.reps_per_class; ++rep) {
      Rng rng(derive_seed(seed, {ci, rep}));
      std::normal_distribution<double> normal(0.0, 1.0);
      FrameMatrix frames(static_cast<Eigen::Index>(spec.length), static_cast<Eigen::Index>(n));
      for (std::size_t c = 0; c < n; ++c) {
        const auto it = cls.channels.find(c);
        const ChannelDynamics& dyn = it == cls.channels.end() ? cls.fallback : it->second;
        const double offset = spec.start_jitter > 0.0 ? spec.start_jitter * normal(rng) : 0.0;
        frames(0, static_cast<Eigen::Index>(c)) = dyn.start0 + offset;
        frames(1, static_cast<Eigen::Index>(c)) = dyn.start1 + offset;
      }
      for (std::size_t k = 0; k < steps; ++k) {
        const auto t = static_cast<Eigen::Index>(k + 2);
        const Eigen::RowVectorXd prev1 = frames.row(t - 1);
        const Eigen::RowVectorXd prev2 = frames.row(t - 2);
        for (const auto& eq : system.equations) {
          const Eigen::VectorXd coeffs = truth[eq.target].mean.row(static_cast<Eigen::Index>(k)).transpose();
          double y = eval_equation(eq, coeffs, prev1, prev2);
          if (spec.noise_sigma > 0.0) y += spec.noise_sigma * normal(rng);
          frames(t, static_cast<Eigen::Index>(eq.target)) = y;
        }
      }
      seqs.emplace_back(std::move(frames), names, spec.frame_rate_hz, cls.label, "synth-" + std::to_string(rep));
    }
    result.truth.emplace(cls.label, std::move(truth));
  }
  result.dataset = MovementDataset(std::move(seqs), spec.topology);
  return result;
}

// JSON form of the synthetic spec consumed by `gomkit synth`.

namespace detail {

inline ChannelDynamics parse_dynamics(const nlohmann::json& j, double fps, const ChannelDynamics& base) {
  ChannelDynamics d = base;
  if (j.contains("oscillator")) {
    const auto& o = j.at("oscillator");
    d = ChannelDynamics::oscillator(o.at("frequency_hz").get<double>(), o.value("amplitude", 1.0),
                                    o.value("phase", 0.0), fps, o.value("radius", 1.0));
  }
  if (j.contains("alpha")) {
    const auto a = j.at("alpha").get<std::vector<double>>();
    if (a.size() != 2) throw ValidationError("alpha must have two entries");
    d.alpha1 = a[0];
    d.alpha2 = a[1];
  }
  if (j.contains("alpha_end")) {
    const auto a = j.at("alpha_end").get<std::vector<double>>();
    if (a.size() != 2) throw ValidationError("alpha_end must have two entries");
    d.alpha1_end = a[0];
    d.alpha2_end = a[1];
  }
  if (j.contains("start")) {
    const auto s = j.at("start").get<std::vector<double>>();
    if (s.size() != 2) throw ValidationError("start must have two entries");
    d.start0 = s[0];
    d.start1 = s[1];
  }
  return d;
}

} // namespace detail

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  try {
    SynthSpec spec;
    if (j.contains("topology")) spec.topology = SkeletonTopology::from_json(j.at("topology"));
    spec.frame_rate_hz = j.value("frame_rate_hz", kDefaultFrameRateHz);
    spec.length = j.value("length", std::size_t{200});
    spec.reps_per_class = j.value("reps_per_class", std::size_t{1});
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.start_jitter = j.value("start_jitter", 0.0);
    for (const auto& jc : j.at("classes")) {
      SynthClass cls;
      cls.label = jc.at("label").get<std::string>();
      if (cls.label.empty() || cls.label.find_first_of("/\\ ") != std::string::npos)
        throw ValidationError("invalid class label '" + cls.label + "'");
      if (jc.contains("default")) cls.fallback = detail::parse_dynamics(jc.at("default"), spec.frame_rate_hz, {});
      if (jc.contains("channels"))
        for (const auto& [name, jd] : jc.at("channels").items())
          cls.channels[spec.topology.channel_index(name)] =
              detail::parse_dynamics(jd, spec.frame_rate_hz, cls.fallback);
      if (jc.contains("couplings"))
        for (const auto& jp : jc.at("couplings")) {
          Coupling cp;
          cp.target = spec.topology.channel_index(jp.at("target").get<std::string>());
          cp.source = spec.topology.channel_index(jp.at("source").get<std::string>());
          cp.beta = jp.at("beta").get<double>();
          if (jp.contains("beta_end")) cp.beta_end = jp.at("beta_end").get<double>();
          cls.couplings.push_back(cp);
        }
      spec.classes.push_back(std::move(cls));
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed synthetic spec: ") + e.what());
  }
}

} // namespace gomkit
