// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace gomkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

int failures = 0;
std::set<std::string> only; // optional subset named on the command line

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  if (!only.empty() && !only.count(name)) return;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && secs > budget_s) {
    o.pass = false;
    o.detail += "; over budget of " + fmt(budget_s) + " s";
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(secs) << " s]" << std::endl;
}

// Independent oracles -----------------------------------------------------

// Least squares by the normal equations and Gaussian elimination with partial pivoting.
std::vector<double> normal_equations(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  const std::size_t m = rows.front().size();
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) a[i][j] += rows[r][i] * rows[r][j];
      a[i][m] += rows[r][i] * y[r];
    }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = a[i][m] / a[i][i];
  return b;
}

// Top-down memoised DTW, three-neighbour recurrence, Euclidean frame cost.
double dtw_oracle(const FrameMatrix& a, const FrameMatrix& b) {
  const auto n = static_cast<std::size_t>(a.rows()), m = static_cast<std::size_t>(b.rows());
  std::vector<double> memo(n * m, -1.0);
  std::function<double(std::size_t, std::size_t)> cost = [&](std::size_t i, std::size_t j) -> double {
    double& slot = memo[i * m + j];
    if (slot >= 0.0) return slot;
    double d = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const double x = a(static_cast<Eigen::Index>(i), c) - b(static_cast<Eigen::Index>(j), c);
      d += x * x;
    }
    d = std::sqrt(d);
    if (i == 0 && j == 0) return slot = d;
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, cost(i - 1, j));
    if (j > 0) best = std::min(best, cost(i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, cost(i - 1, j - 1));
    return slot = d + best;
  };
  return cost(n - 1, m - 1);
}

double rms(const Eigen::VectorXd& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

// Datasets ------------------------------------------------------------------

// Joints whose channels drive every cross-channel coupling of the selection dataset.
const std::vector<std::string> kCouplingJoints{"SP", "LA", "RUL"};

MovementDataset coupled_gestures(const SkeletonTopology& topo, std::size_t reps, std::uint64_t seed) {
  SynthSpec spec;
  spec.topology = topo;
  spec.frame_rate_hz = 30.0;
  spec.length = 150;
  spec.reps_per_class = reps;
  spec.noise_sigma = 0.01;
  spec.start_jitter = 1.0;
  const auto ch = [&](const char* name) { return topo.channel_index(name); };
  const std::vector<std::pair<const char*, const char*>> links{
      {"H.x", "SP.x"}, {"LA.x", "SP.x"}, {"RA.y", "LA.y"}, {"SP.y", "LA.y"}, {"LUL.z", "RUL.z"}, {"H.z", "RUL.z"}};
  const char* labels[3] = {"wave", "lift", "kick"};
  for (int k = 0; k < 3; ++k) {
    SynthClass cls;
    cls.label = labels[k];
    for (std::size_t c = 0; c < topo.channel_count(); ++c) {
      const auto joint = topo.joint_name(SkeletonTopology::joint_of_channel(c));
      const bool driver = std::find(kCouplingJoints.begin(), kCouplingJoints.end(), joint) != kCouplingJoints.end();
      // Only the driving joints change between classes: frequency and reach.
      const double f = 1.0 + 0.11 * static_cast<double>(c) + (driver ? 0.35 * k : 0.0);
      const double amp = (12.0 + static_cast<double>(c % 5)) * (driver ? 1.0 + 1.2 * k : 1.0);
      cls.channels[c] = ChannelDynamics::oscillator(f, amp, 0.4 * static_cast<double>(c), 30.0, 1.0);
    }
    for (const auto& [target, source] : links) cls.couplings.push_back({ch(target), ch(source), 0.06, {}});
    spec.classes.push_back(cls);
  }
  return synth_generate(spec, seed).dataset;
}

MovementDataset sinusoid_gestures(std::size_t per_class, std::uint64_t seed) {
  SynthSpec spec;
  spec.topology = fx::two_joint_topology();
  spec.length = 90;
  spec.reps_per_class = per_class;
  spec.noise_sigma = 0.02;
  spec.start_jitter = 2.0;
  const double freqs[3] = {0.4, 1.0, 2.0};
  const char* labels[3] = {"slow", "mid", "fast"};
  for (int c = 0; c < 3; ++c) {
    SynthClass cls;
    cls.label = labels[c];
    for (std::size_t ch = 0; ch < 6; ++ch)
      cls.channels[ch] = ChannelDynamics::oscillator(freqs[c], 20.0 + 2.0 * static_cast<double>(ch),
                                                     0.4 * static_cast<double>(ch), 90.0, 0.999);
    spec.classes.push_back(cls);
  }
  return synth_generate(spec, seed).dataset;
}

// Criteria ------------------------------------------------------------------

Outcome matrix_equivalence() {
  const auto sys = build_system(SkeletonTopology::default_body());
  const std::size_t n = sys.topology.channel_count();
  Rng rng(101);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    SystemTensor a(n);
    std::vector<Eigen::VectorXd> coeffs;
    for (const auto& eq : sys.equations) {
      Eigen::VectorXd c(static_cast<Eigen::Index>(eq.coefficient_count()));
      for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = normal(rng);
      scatter_equation(eq, c, a);
      coeffs.push_back(std::move(c));
    }
    Eigen::Matrix<double, 2, Eigen::Dynamic> x(2, static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 10.0 * normal(rng);
    const Eigen::RowVectorXd y = eval_system_matrix(a, x);
    const Eigen::RowVectorXd p1 = x.row(0), p2 = x.row(1);
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(y(static_cast<Eigen::Index>(i)) - eval_equation(sys.equations[i], coeffs[i], p1, p2)));
  }
  return {worst < 1e-10, "max |matrix - per-equation| = " + fmt(worst) + " over 1000 pairs (" + std::to_string(n) + " channels)"};
}

Outcome ar2_recovery() {
  const auto topo = fx::single_joint_topology();
  const double f = 0.8, fps = 90.0, w = 2.0 * std::numbers::pi * f / fps;
  SynthSpec spec;
  spec.topology = topo;
  spec.length = 400;
  spec.frame_rate_hz = fps;
  SynthClass cls;
  cls.label = "s";
  cls.channels[0] = ChannelDynamics::oscillator(f, 20.0, 0.3, fps);
  cls.channels[1] = ChannelDynamics::oscillator(0.37, 15.0, 1.1, fps);
  cls.channels[2] = ChannelDynamics::oscillator(1.3, 10.0, 2.0, fps);
  spec.classes = {cls};
  const auto seq = synth_generate(spec, 1).dataset[0];
  const auto fit = mle_fit(build_equation(topo, "J.x"), seq, KfConfig{});
  const Eigen::RowVectorXd avg = fit.trajectory.mean.colwise().mean();
  const double e1 = std::abs(avg(0) - 2.0 * std::cos(w)), e2 = std::abs(avg(1) - 1.0);
  return {e1 < 1e-2 && e2 < 1e-2, "|a1 - 2cos(w)| = " + fmt(e1) + ", |a2 - 1| = " + fmt(e2)};
}

Outcome ols_limit() {
  const auto topo = fx::mini6_topology();
  double worst = 0.0;
  for (std::uint64_t p = 0; p < 20; ++p) {
    Rng rng(derive_seed(202, {p}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::size_t target = p % topo.channel_count();
    const auto eq = build_equation(topo, target);
    const auto m = eq.coefficient_count();
    std::vector<double> truth(m);
    truth[0] = 0.5 * uni(rng);
    truth[1] = 0.3 * uni(rng);
    for (std::size_t i = 2; i < m; ++i) truth[i] = uni(rng);
    const Eigen::Index len = 300;
    FrameMatrix f(len, static_cast<Eigen::Index>(topo.channel_count()));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = normal(rng);
    const auto t = static_cast<Eigen::Index>(target);
    for (Eigen::Index k = 2; k < len; ++k) {
      double y = truth[0] * f(k - 1, t) - truth[1] * f(k - 2, t);
      for (std::size_t i = 0; i < eq.regressors.size(); ++i)
        y += truth[i + 2] * f(k - 1, static_cast<Eigen::Index>(eq.regressors[i].channel));
      f(k, t) = y + 0.1 * normal(rng);
    }
    std::vector<std::vector<double>> rows;
    std::vector<double> ys;
    for (Eigen::Index k = 2; k < len; ++k) {
      std::vector<double> row{f(k - 1, t), -f(k - 2, t)};
      for (const auto& r : eq.regressors) row.push_back(f(k - 1, static_cast<Eigen::Index>(r.channel)));
      rows.push_back(std::move(row));
      ys.push_back(f(k, t));
    }
    const auto b = normal_equations(rows, ys);
    const auto out = kf_filter(eq, fx::sequence_from(f, topo), KfTheta::shared(1e-12, 0.01), KfConfig{}, false);
    const auto last = out.filtered.mean.rows() - 1;
    for (std::size_t i = 0; i < m; ++i)
      worst = std::max(worst, std::abs(out.filtered.mean(last, static_cast<Eigen::Index>(i)) - b[i]));
  }
  return {worst < 1e-3, "max |filtered(T) - OLS| = " + fmt(worst) + " over 20 problems"};
}

Outcome self_reconstruction() {
  SynthSpec spec;
  spec.topology = fx::mini6_topology();
  spec.frame_rate_hz = 30.0;
  spec.length = 150;
  spec.noise_sigma = 0.01;
  const auto& topo = spec.topology;
  auto cls = fx::oscillator_class(topo, "a", 2, 30.0, 1.0, 1.0, 3.0);
  cls.couplings.push_back({topo.channel_index("SP.x"), topo.channel_index("H.x"), 0.05, {}});
  cls.couplings.push_back({topo.channel_index("RA.y"), topo.channel_index("LA.y"), 0.05, {}});
  spec.classes = {cls};
  const auto seq = synth_generate(spec, 102).dataset[0];
  const auto sys = build_system(topo);
  KfConfig cfg;
  cfg.optimizer.seed = 2;
  const auto fit = fit_sequence(sys, seq, cfg);
  std::vector<CoefficientTrajectory> trs;
  for (const auto& f : fit) trs.push_back(f.trajectory);
  const auto gen = generate(sys, trs, seq.frame(0), seq.frame(1), seq.length());
  const auto m = metrics(gen, seq);
  double worst = 0.0;
  for (std::size_t c = 0; c < seq.channel_count(); ++c)
    worst = std::max(worst, m.per_channel[c].mae / rms(seq.frames().col(static_cast<Eigen::Index>(c))));
  return {worst < 0.05 && m.u1 < 0.1,
          "worst channel MAE/RMS = " + fmt(worst) + ", U1 = " + fmt(m.u1) + ", MAE = " + fmt(m.mae)};
}

Outcome metric_identities() {
  Rng rng(303);
  const auto x = fx::random_frames(50, 9, rng, 5.0);
  const auto self = metrics(x, x);
  bool ok = self.mae == 0.0 && self.rmse == 0.0 && self.u1 == 0.0;
  std::string detail = ok ? "metrics(x,x) = (0,0,0)" : "metrics(x,x) non-zero";
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::size_t bad_u1 = 0, bad_order = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = fx::random_frames(30, 6, rng, scale(rng)), b = fx::random_frames(30, 6, rng, scale(rng));
    const auto m = metrics(a, b);
    if (!(m.u1 >= 0.0 && m.u1 <= 1.0)) ++bad_u1;
    if (!(m.rmse >= m.mae)) ++bad_order;
  }
  ok = ok && bad_u1 == 0 && bad_order == 0;
  return {ok, detail + "; U1 outside [0,1]: " + std::to_string(bad_u1) + "/1000; RMSE < MAE: " +
                  std::to_string(bad_order) + "/1000"};
}

Outcome ttest_calibration() {
  const auto topo = fx::single_joint_topology();
  const auto eq = build_equation(topo, "J.x");
  std::size_t rejected[2] = {0, 0};
  const std::size_t fits = 1000;
  for (std::size_t i = 0; i < fits; ++i) {
    // J.x is AR(2) in its own lags only; both sibling coefficients are truly zero.
    SynthSpec spec;
    spec.topology = topo;
    spec.length = 200;
    spec.frame_rate_hz = 30.0;
    spec.noise_sigma = 1.0;
    SynthClass cls;
    cls.label = "null";
    cls.channels[0] = ChannelDynamics::oscillator(1.0, 1.0, 0.0, 30.0, 0.95);
    cls.channels[1] = ChannelDynamics::oscillator(2.3, 1.0, 0.0, 30.0, 0.95);
    cls.channels[2] = ChannelDynamics::oscillator(3.7, 1.0, 0.0, 30.0, 0.95);
    spec.classes = {cls};
    const auto seq = synth_generate(spec, derive_seed(42, {i})).dataset[0];
    KfConfig cfg;
    cfg.optimizer.seed = i;
    const auto sig = coefficient_ttest(mle_fit(eq, seq, cfg));
    for (int s = 0; s < 2; ++s)
      if (sig.coefficients[static_cast<std::size_t>(2 + s)].significant) ++rejected[s];
  }
  const double rate = static_cast<double>(rejected[0] + rejected[1]) / static_cast<double>(2 * fits);
  return {rate >= 0.03 && rate <= 0.07, "null rejection rate = " + fmt(rate) + " (J.y " +
                                            fmt(static_cast<double>(rejected[0]) / fits) + ", J.z " +
                                            fmt(static_cast<double>(rejected[1]) / fits) + ") over 1000 fits"};
}

Outcome tolerance_bands() {
  Rng rng(404);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index steps = 40, cols = 7;
  const double k = 2.0;
  double worst = 0.0;
  for (std::size_t reps : {1u, 2u, 5u, 12u}) {
    std::vector<CoefficientTrajectory> trs(reps);
    for (auto& tr : trs) {
      tr.target = 3;
      tr.mean.resize(steps, cols);
      for (Eigen::Index i = 0; i < tr.mean.size(); ++i) tr.mean(i) = 3.0 * normal(rng) + 1.0;
      tr.variance = Eigen::MatrixXd::Ones(steps, cols);
    }
    const auto band = tolerance_intervals(std::span<const CoefficientTrajectory>(trs), k);
    for (Eigen::Index i = 0; i < steps; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double sum = 0.0;
        for (const auto& tr : trs) sum += tr.mean(i, j);
        const double mean = sum / static_cast<double>(reps);
        double ss = 0.0;
        for (const auto& tr : trs) ss += (tr.mean(i, j) - mean) * (tr.mean(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(reps));
        worst = std::max({worst, std::abs(band.mean(i, j) - mean), std::abs(band.stddev(i, j) - sd),
                          std::abs(band.lower(i, j) - (mean - k * sd)), std::abs(band.upper(i, j) - (mean + k * sd))});
      }
  }
  std::vector<CoefficientTrajectory> same(6);
  for (auto& tr : same) {
    tr.mean = Eigen::MatrixXd::Constant(steps, cols, 0.37);
    tr.variance = Eigen::MatrixXd::Ones(steps, cols);
  }
  const auto flat = tolerance_intervals(std::span<const CoefficientTrajectory>(same), k);
  const double width = (flat.upper - flat.lower).cwiseAbs().maxCoeff();
  return {worst < 1e-12 && width == 0.0,
          "max |band - brute force| = " + fmt(worst) + "; identical repetitions width = " + fmt(width)};
}

Outcome sensor_selection() {
  const auto topo = fx::mini6_topology();
  const auto ds = coupled_gestures(topo, 10, 505);
  const auto sys = build_system(topo);
  std::vector<EquationSignificance> reports;
  for (const auto& label : ds.class_labels()) {
    KfConfig cfg;
    cfg.optimizer.seed = 5;
    const auto fit = fit_reference(sys, ds, label, cfg);
    const auto rep = significance_report(fit);
    reports.insert(reports.end(), rep.begin(), rep.end());
  }
  const auto ranking = rank_and_select(reports, topo, 3);
  std::set<std::size_t> expected;
  for (const auto& j : kCouplingJoints) expected.insert(topo.joint_index(j));
  const std::set<std::size_t> got(ranking.selected_joints.begin(), ranking.selected_joints.end());
  std::string names;
  for (auto j : ranking.selected_joints) names += (names.empty() ? "" : ",") + topo.joint_name(j);
  std::size_t runner_up = 0;
  for (std::size_t c = 0; c < topo.channel_count(); ++c)
    if (ranking.counts[c] < ranking.threshold) runner_up = std::max(runner_up, ranking.counts[c]);

  const auto selected = channels_of_joints(ranking.selected_joints);
  const double f1_sel = evaluate_f1(ds, selected, 3, 5, 9).macro_f1;
  Rng rng(606);
  bool no_worse = true;
  std::string randoms;
  for (int draw = 0; draw < 3; ++draw) {
    std::vector<std::size_t> joints(topo.joint_count());
    for (std::size_t j = 0; j < joints.size(); ++j) joints[j] = j;
    std::shuffle(joints.begin(), joints.end(), rng);
    joints.resize(2);
    std::sort(joints.begin(), joints.end());
    const double f1_rand = evaluate_f1(ds, channels_of_joints(joints), 3, 5, 9).macro_f1;
    no_worse = no_worse && f1_sel >= f1_rand;
    randoms += (randoms.empty() ? "" : ", ") + topo.joint_name(joints[0]) + "+" + topo.joint_name(joints[1]) + " " +
               fmt(f1_rand);
  }
  return {got == expected && no_worse,
          "selected {" + names + "} at count " + std::to_string(ranking.threshold) + " (next " +
              std::to_string(runner_up) + "), F1 = " + fmt(f1_sel) + "; random pairs: " + randoms};
}

Outcome hmm_suite() {
  const auto ds = sinusoid_gestures(10, 707);
  const std::vector<std::size_t> chans{0, 1, 2, 3, 4, 5};
  bool monotone = true, masked = true;
  for (const auto& label : ds.class_labels()) {
    for (std::size_t s : {2u, 3u, 5u}) {
      const auto model = train_hmm(ds, label, chans, s);
      for (std::size_t i = 1; i < model.training_loglik.size(); ++i)
        monotone = monotone && model.training_loglik[i] >= model.training_loglik[i - 1] - 1e-8;
      for (Eigen::Index i = 0; i < model.transition.rows(); ++i)
        for (Eigen::Index j = 0; j < model.transition.cols(); ++j)
          if (j != i && j != i + 1) masked = masked && model.transition(i, j) == 0.0;
    }
  }
  const auto rep = evaluate_f1(ds, chans, 3, 5, 11);
  return {monotone && masked && rep.macro_f1 == 1.0,
          std::string("EM monotone: ") + (monotone ? "yes" : "no") + "; left-to-right mask: " +
              (masked ? "kept" : "broken") + "; macro-F1 = " + fmt(rep.macro_f1) + " (10 per class, 3 classes)"};
}

Outcome dtw_medoid() {
  const auto topo = fx::single_joint_topology();
  Rng rng(808);
  std::uniform_int_distribution<int> length(4, 25);
  std::size_t mismatches = 0, datasets = 0;
  for (std::size_t size = 1; size <= 20; ++size) {
    for (int dup = 0; dup < 2; ++dup) {
      std::vector<PostureSequence> seqs;
      for (std::size_t i = 0; i < size; ++i) {
        // Second pass repeats sequences so that sums tie.
        if (dup && i % 2 == 1) {
          seqs.push_back(seqs.back());
          continue;
        }
        seqs.push_back(fx::sequence_from(fx::random_frames(static_cast<std::size_t>(length(rng)), 3, rng), topo, "c"));
      }
      const MovementDataset ds(seqs, topo);
      std::vector<double> sums(size, 0.0);
      for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j)
          if (i != j) sums[i] += dtw_oracle(seqs[i].frames(), seqs[j].frames());
      const auto brute = static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
      if (select_reference_index(ds, "c") != brute) ++mismatches;
      ++datasets;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over " + std::to_string(datasets) +
                               " datasets of 1..20 samples"};
}

} // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) only.insert(argv[i]);
  ScopedWarningHandler quiet([](const std::string&) {});
  criterion("matrix-equivalence", 5.0, matrix_equivalence);
  criterion("ar2-recovery", 30.0, ar2_recovery);
  criterion("ols-limit", 0.0, ols_limit);
  criterion("self-reconstruction", 300.0, self_reconstruction);
  criterion("metric-identities", 0.0, metric_identities);
  criterion("ttest-calibration", 0.0, ttest_calibration);
  criterion("tolerance-bands", 0.0, tolerance_bands);
  criterion("sensor-selection", 0.0, sensor_selection);
  criterion("hmm-suite", 120.0, hmm_suite);
  criterion("dtw-medoid", 0.0, dtw_medoid);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
