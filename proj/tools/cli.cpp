#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "gomkit/gomkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gomkit::cli {
namespace {

// ---------------------------------------------------------------------------
// Output plumbing

std::string fnv1a_hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

void fnv1a_update(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Content digest of a file, or of every file below a directory.
std::string digest(const fs::path& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      fnv1a_update(h, fs::relative(f, p).generic_string());
      fnv1a_update(h, std::string_view("\0", 1));
      fnv1a_update(h, read_file(f));
    }
  } else {
    fnv1a_update(h, read_file(p));
  }
  return fnv1a_hex(h);
}

fs::path normalise(fs::path p) {
  if (!p.has_filename()) p = p.parent_path();
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << text;
  if (!out) throw ValidationError("write failed for " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

/// Output directory built under a temporary name and renamed into place.
class StagedDir {
public:
  explicit StagedDir(const fs::path& target) : target_(normalise(target)) {
    if (fs::exists(target_) && !(fs::is_directory(target_) && fs::is_empty(target_)))
      throw ValidationError("output directory " + target_.string() + " already exists and is not empty");
    auto parent = target_.parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    tmp_ = parent / ("." + target_.filename().string() + ".tmp-" + std::to_string(::getpid()));
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(tmp_, ec);
    }
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  fs::path operator/(const std::string& name) const { return tmp_ / name; }

  void commit() {
    if (fs::exists(target_)) fs::remove(target_); // empty directory, checked above
    fs::rename(tmp_, target_);
    committed_ = true;
  }

private:
  fs::path target_, tmp_;
  bool committed_ = false;
};

struct Manifest {
  std::string command;
  std::optional<std::uint64_t> seed;
  json inputs = json::array();
  json options = json::object();

  void input(const std::string& role, const fs::path& p) {
    inputs.push_back({{"role", role}, {"path", p.generic_string()}, {"fnv1a64", digest(p)}});
  }

  json to_json() const {
    json j;
    j["tool"] = "gomkit";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["inputs"] = inputs;
    j["options"] = options;
    j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    return j;
  }
};

constexpr const char* kRunManifest = "run.json";

// ---------------------------------------------------------------------------
// Shared option groups

struct FitFlags {
  std::size_t max_iters = OptimizerConfig{}.max_iters;
  std::size_t restarts = OptimizerConfig{}.restarts;
  double tolerance = OptimizerConfig{}.tolerance;
  double init_var = KfConfig{}.init_coeff_var;
  bool per_coefficient_q = false;

  void add(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Nelder-Mead iterations per restart")->capture_default_str();
    app->add_option("--restarts", restarts, "Optimizer restarts from perturbed optima")->capture_default_str();
    app->add_option("--tolerance", tolerance, "Optimizer tolerance on -loglik")->capture_default_str();
    app->add_option("--init-var", init_var, "Prior variance of every coefficient")->capture_default_str();
    app->add_flag("--per-coefficient-q", per_coefficient_q, "One process variance per coefficient");
  }

  KfConfig config(std::uint64_t seed) const {
    KfConfig c;
    c.init_coeff_var = init_var;
    c.per_coefficient_q = per_coefficient_q;
    c.optimizer.max_iters = max_iters;
    c.optimizer.restarts = restarts;
    c.optimizer.tolerance = tolerance;
    c.optimizer.seed = seed;
    return c;
  }

  json to_json() const {
    return {{"max_iters", max_iters},
            {"restarts", restarts},
            {"tolerance", tolerance},
            {"init_var", init_var},
            {"per_coefficient_q", per_coefficient_q}};
  }
};

CoefficientModel model_from_fit(const SkeletonTopology& topo, std::vector<TrainedEquation> eqs,
                                const std::string& label, double fps) {
  CoefficientModel m;
  m.topology = topo;
  m.method = "kf";
  m.class_label = label;
  m.frame_rate_hz = fps;
  m.equations = std::move(eqs);
  return m;
}

std::string file_stem_for(const std::string& label) {
  std::string s = label.empty() ? "unlabelled" : label;
  for (auto& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

std::string slot_name(const GomEquation& eq, const SkeletonTopology& topo, std::size_t slot) {
  if (slot == 0) return "a1";
  if (slot == 1) return "a2";
  return "b[" + topo.channel_name(eq.regressors[slot - 2].channel) + "]";
}

/// Channel list from "H,SP.x,LA" style text (joint names expand to three
/// channels) or from a select-sensors output file.
std::vector<std::size_t> parse_channels(const std::string& spec, const SkeletonTopology& topo) {
  std::vector<std::string> names;
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
    json j;
    try {
      j = json::parse(read_file(spec));
      names = j.at("channels").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError(spec + ": " + e.what());
    }
  } else {
    for (auto tok : text::split(spec, ','))
      if (!text::trim(tok).empty()) names.emplace_back(text::trim(tok));
  }
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    if (auto c = topo.find_channel(n)) {
      out.push_back(*c);
    } else if (auto j = topo.find_joint(n)) {
      for (Axis a : kAxes) out.push_back(SkeletonTopology::channel(*j, a));
    } else {
      throw NotFoundError("unknown channel or joint '" + n + "'");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ValidationError("channel subset is empty");
  return out;
}

json metrics_json(const GenerationMetrics& m, const std::vector<std::string>& names) {
  json j;
  j["MAE"] = m.mae;
  j["RMSE"] = m.rmse;
  j["U1"] = m.u1;
  j["channels"] = json::array();
  for (std::size_t c = 0; c < m.per_channel.size(); ++c)
    j["channels"].push_back({{"channel", names[c]},
                             {"MAE", m.per_channel[c].mae},
                             {"RMSE", m.per_channel[c].rmse},
                             {"U1", m.per_channel[c].u1}});
  return j;
}

FrameMatrix frames_from_table(const MotionTable& t, const std::string& source) {
  if (t.rows.size() < kMinSequenceFrames) throw ValidationError(source + ": needs at least 3 frames");
  FrameMatrix f(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t k = 0; k < t.header.size(); ++k)
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = t.rows[i][k];
  return f;
}

MotionTable read_table(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open motion file " + p.string());
  return parse_motion_csv(in, p.string());
}

// ---------------------------------------------------------------------------
// Commands

struct SynthArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  json spec_json;
  try {
    spec_json = json::parse(read_file(a.spec));
  } catch (const json::exception& e) {
    throw ValidationError(a.spec + ": " + e.what());
  }
  const auto spec = synth_spec_from_json(spec_json);
  const auto res = synth_generate(spec, a.seed);
  StagedDir dir(a.out);
  save_dataset(dir / "", res.dataset);
  fs::create_directories(dir / "truth");
  for (const auto& cls : spec.classes) {
    CoefficientModel m;
    m.topology = spec.topology;
    m.method = "imported";
    m.class_label = cls.label;
    m.frame_rate_hz = spec.frame_rate_hz;
    const auto sys = build_system(spec.topology);
    const auto& truth = res.truth.at(cls.label);
    for (std::size_t i = 0; i < sys.size(); ++i) {
      TrainedEquation te;
      te.equation = sys.equations[i];
      te.trajectory = truth[i];
      te.theta = KfTheta::shared(0.0, spec.noise_sigma * spec.noise_sigma);
      m.equations.push_back(std::move(te));
    }
    save_coefficients(dir / ("truth/" + file_stem_for(cls.label) + ".json"), m);
  }
  Manifest man;
  man.command = "synth";
  man.seed = a.seed;
  man.input("spec", a.spec);
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  out << "wrote " << res.dataset.size() << " sequences to " << a.out << '\n';
}

struct FitArgs {
  std::string method = "kf", data, label, out;
  std::uint64_t seed = 0;
  FitFlags flags;
};

void cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto ds = load_dataset(a.data);
  std::vector<std::string> labels = a.label.empty() ? ds.class_labels() : std::vector<std::string>{a.label};
  const auto sys = build_system(ds.topology());
  const auto cfg = a.flags.config(a.seed);
  const auto workers = default_worker_count();
  StagedDir dir(a.out);
  json refs = json::object();
  for (const auto& label : labels) {
    const auto ref = select_reference_index(ds, label, workers);
    auto eqs = fit_sequence(sys, ds[ref], cfg, workers);
    const auto file = file_stem_for(label) + ".json";
    save_coefficients(dir / file, model_from_fit(ds.topology(), std::move(eqs), label, ds[ref].frame_rate_hz()));
    refs[label] = {{"file", file}, {"reference_index", ref}};
    out << "fitted class '" << label << "' on sequence " << ref << " -> " << file << '\n';
  }
  write_json(dir / "models.json", refs);
  Manifest man;
  man.command = "fit";
  man.seed = a.seed;
  man.input("data", a.data);
  man.options = a.flags.to_json();
  man.options["method"] = a.method;
  man.options["class"] = a.label;
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
}

struct GenerateArgs {
  std::string model, seed_frames, out;
  std::size_t length = 0;
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto model = load_coefficients(a.model);
  const auto seeds = load_motion_csv(a.seed_frames, model.topology);
  const auto trs = model.trajectories();
  const auto seq = generate(model.system(), trs, seeds.frame(0), seeds.frame(1), a.length, model.frame_rate_hz);
  const fs::path target(a.out);
  if (!target.parent_path().empty()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp-" + std::to_string(::getpid());
  {
    std::ostringstream csv;
    write_motion_csv(csv, seq.frames(), seq.channel_names(), seq.frame_rate_hz());
    write_text(tmp, csv.str());
  }
  Manifest man;
  man.command = "generate";
  man.input("model", a.model);
  man.input("seed_frames", a.seed_frames);
  man.options = {{"length", a.length}};
  write_json(target.string() + ".run.json", man.to_json());
  fs::rename(tmp, target);
  out << "wrote " << seq.length() << " frames to " << a.out << '\n';
}

struct MetricsArgs {
  std::string generated, truth, topology, out;
};

void cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  FrameMatrix g, t;
  std::vector<std::string> names;
  if (!a.topology.empty()) {
    const auto topo = load_topology(a.topology);
    g = load_motion_csv(a.generated, topo).frames();
    t = load_motion_csv(a.truth, topo).frames();
    names = topo.channel_names();
  } else {
    const auto tg = read_table(a.generated), tt = read_table(a.truth);
    if (tg.header != tt.header) throw ShapeError("the two files have different channel columns");
    g = frames_from_table(tg, a.generated);
    t = frames_from_table(tt, a.truth);
    names = tg.header;
  }
  const auto j = metrics_json(metrics(g, t), names);
  if (!a.out.empty()) {
    StagedDir dir(a.out);
    write_json(dir / "metrics.json", j);
    Manifest man;
    man.command = "metrics";
    man.input("generated", a.generated);
    man.input("truth", a.truth);
    if (!a.topology.empty()) man.input("topology", a.topology);
    write_json(dir / kRunManifest, man.to_json());
    dir.commit();
  }
  out << j.dump(2) << '\n';
}

struct AnalyzeArgs {
  std::string model, out;
  double level = kSignificanceLevel, majority = 0.5;
};

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const auto model = load_coefficients(a.model);
  const auto& topo = model.topology;
  SignificanceOptions opt{a.level, a.majority};
  const auto reports = significance_report(model.equations, opt);
  json j;
  j["class_label"] = model.class_label;
  j["level"] = a.level;
  j["majority"] = a.majority;
  j["topology"] = topo.to_json();
  j["equations"] = json::array();
  for (const auto& r : reports) j["equations"].push_back(to_json(r, topo));

  std::ostringstream csv;
  csv << "step";
  std::size_t steps = 0;
  for (const auto& te : model.equations) {
    steps = std::max(steps, te.trajectory.steps());
    for (std::size_t s = 0; s < te.equation.coefficient_count(); ++s)
      csv << ',' << topo.channel_name(te.equation.target) << ':' << slot_name(te.equation, topo, s);
  }
  csv << '\n';
  for (std::size_t k = 0; k < steps; ++k) {
    csv << k;
    for (const auto& r : reports)
      for (const auto& c : r.coefficients)
        csv << ',' << text::format_double(c.p_values(static_cast<Eigen::Index>(std::min<std::size_t>(k, c.p_values.size() - 1))));
    csv << '\n';
  }

  StagedDir dir(a.out);
  write_json(dir / "significance.json", j);
  write_text(dir / "pvalues.csv", csv.str());
  Manifest man;
  man.command = "analyze";
  man.input("model", a.model);
  man.options = {{"level", a.level}, {"majority", a.majority}};
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  std::size_t significant = 0;
  for (const auto& r : reports)
    for (const auto& c : r.coefficients) significant += c.significant;
  out << significant << " significant coefficient slots across " << reports.size() << " equations\n";
}

struct SelectArgs {
  std::vector<std::string> reports;
  std::string out;
  std::size_t top_k = kDefaultTopKChannels;
};

void cmd_select(const SelectArgs& a, std::ostream& out) {
  std::optional<SkeletonTopology> topo;
  std::vector<EquationSignificance> all;
  for (const auto& path : a.reports) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw ValidationError(path + ": " + e.what());
    }
    auto t = SkeletonTopology::from_json(j.at("topology"));
    if (topo && !(*topo == t)) throw ValidationError(path + ": report topology differs from the first report");
    topo = t;
    auto eqs = significance_from_json(j, *topo);
    all.insert(all.end(), eqs.begin(), eqs.end());
  }
  const auto sel = rank_and_select(all, *topo, a.top_k);
  json j;
  j["top_k"] = sel.top_k;
  j["threshold"] = sel.threshold;
  j["joints"] = json::array();
  for (auto jt : sel.selected_joints) j["joints"].push_back(topo->joint_name(jt));
  j["channels"] = json::array();
  for (auto c : channels_of_joints(sel.selected_joints)) j["channels"].push_back(topo->channel_name(c));
  j["selected_channels"] = json::array();
  for (auto c : sel.selected_channels) j["selected_channels"].push_back(topo->channel_name(c));
  j["counts"] = json::object();
  for (std::size_t c = 0; c < sel.counts.size(); ++c) j["counts"][topo->channel_name(c)] = sel.counts[c];

  StagedDir dir(a.out);
  write_json(dir / "sensors.json", j);
  Manifest man;
  man.command = "select-sensors";
  for (const auto& r : a.reports) man.input("report", r);
  man.options = {{"top_k", a.top_k}};
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  for (std::size_t i = 0; i < sel.selected_joints.size(); ++i)
    out << (i ? "," : "") << topo->joint_name(sel.selected_joints[i]);
  out << '\n';
}

struct ToleranceArgs {
  std::string data, label, out;
  std::uint64_t seed = 0;
  double k_sigma = 2.0;
  FitFlags flags;
};

void cmd_tolerance(const ToleranceArgs& a, std::ostream& out) {
  const auto ds = load_dataset(a.data);
  const auto& topo = ds.topology();
  const auto sys = build_system(topo);
  const auto workers = default_worker_count();
  const auto idx = ds.indices_of(a.label);
  if (idx.empty()) throw NotFoundError("class '" + a.label + "' has no sequences");
  const auto ref = select_reference_index(ds, a.label, workers);
  const auto cfg = a.flags.config(a.seed);

  std::vector<std::vector<TrainedEquation>> fits;
  for (auto i : idx) fits.push_back(fit_sequence(sys, align_to_template(ds[i], ds[ref]), cfg, workers));

  StagedDir dir(a.out);
  fs::create_directories(dir / "bands");
  json summary;
  summary["class_label"] = a.label;
  summary["reference_index"] = ref;
  summary["repetitions"] = idx.size();
  summary["k_sigma"] = a.k_sigma;
  summary["bands"] = json::array();
  for (std::size_t e = 0; e < sys.size(); ++e) {
    std::vector<TrainedEquation> reps;
    for (const auto& f : fits) reps.push_back(f[e]);
    const auto band = tolerance_intervals(std::span<const TrainedEquation>(reps), a.k_sigma);
    const auto& eq = sys.equations[e];
    std::ostringstream csv;
    csv << "step";
    for (std::size_t s = 0; s < eq.coefficient_count(); ++s) {
      const auto n = slot_name(eq, topo, s);
      csv << ',' << n << "_mean," << n << "_std," << n << "_lower," << n << "_upper";
    }
    csv << '\n';
    for (Eigen::Index k = 0; k < band.mean.rows(); ++k) {
      csv << k;
      for (Eigen::Index s = 0; s < band.mean.cols(); ++s)
        csv << ',' << text::format_double(band.mean(k, s)) << ',' << text::format_double(band.stddev(k, s)) << ','
            << text::format_double(band.lower(k, s)) << ',' << text::format_double(band.upper(k, s));
      csv << '\n';
    }
    const auto file = "bands/" + topo.channel_name(eq.target) + ".csv";
    write_text(dir / file, csv.str());
    summary["bands"].push_back({{"target", topo.channel_name(eq.target)}, {"file", file}});
  }
  write_json(dir / "tolerance.json", summary);
  Manifest man;
  man.command = "tolerance";
  man.seed = a.seed;
  man.input("data", a.data);
  man.options = a.flags.to_json();
  man.options["class"] = a.label;
  man.options["k_sigma"] = a.k_sigma;
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  out << "wrote " << sys.size() << " tolerance bands over " << idx.size() << " repetitions to " << a.out << '\n';
}

struct RecognizeArgs {
  std::string data, channels, out;
  std::size_t states = 6, folds = 5;
  std::uint64_t seed = 0;
};

void cmd_recognize(const RecognizeArgs& a, std::ostream& out) {
  const auto ds = load_dataset(a.data);
  const auto chans = parse_channels(a.channels, ds.topology());
  const auto rep = evaluate_f1(ds, chans, a.states, a.folds, a.seed);
  json j;
  j["macro_f1"] = rep.macro_f1;
  j["folds"] = rep.folds;
  j["states"] = a.states;
  j["labels"] = rep.labels;
  j["channels"] = json::array();
  for (auto c : chans) j["channels"].push_back(ds.topology().channel_name(c));
  j["confusion"] = json::array();
  for (Eigen::Index r = 0; r < rep.confusion.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < rep.confusion.cols(); ++c) row.push_back(rep.confusion(r, c));
    j["confusion"].push_back(row);
  }
  j["per_class"] = json::array();
  for (const auto& s : rep.per_class)
    j["per_class"].push_back(
        {{"label", s.label}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});

  StagedDir dir(a.out);
  write_json(dir / "recognition.json", j);
  Manifest man;
  man.command = "recognize";
  man.seed = a.seed;
  man.input("data", a.data);
  if (fs::is_regular_file(a.channels)) man.input("channels", a.channels);
  man.options = {{"channels", a.channels}, {"states", a.states}, {"folds", a.folds}};
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  out << "macro-F1 " << text::format_double(rep.macro_f1) << '\n';
}

struct ImportArgs {
  std::string in, topology, out;
};

void cmd_import(const ImportArgs& a, std::ostream& out) {
  auto model = load_coefficients(a.in);
  if (!a.topology.empty() && !(load_topology(a.topology) == model.topology))
    throw ValidationError("coefficient file topology differs from " + a.topology);
  model.method = "imported";
  StagedDir dir(a.out);
  save_coefficients(dir / "coefficients.json", model);
  Manifest man;
  man.command = "import-coeffs";
  man.input("coefficients", a.in);
  if (!a.topology.empty()) man.input("topology", a.topology);
  write_json(dir / kRunManifest, man.to_json());
  dir.commit();
  out << "imported " << model.equations.size() << " equations\n";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gomkit: gesture operational models with time-varying coefficients", "gomkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset from a JSON spec");
  c_synth->add_option("--spec", synth.spec, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  c_synth->add_option("--seed", synth.seed, "Random seed")->required();
  c_synth->add_option("--out", synth.out, "Output dataset directory")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit time-varying coefficients on each class's reference movement");
  c_fit->add_option("--method", fit.method, "Trainer")->check(CLI::IsMember({"kf"}))->capture_default_str();
  c_fit->add_option("--data", fit.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_fit->add_option("--class", fit.label, "Only this class (default: every class)");
  c_fit->add_option("--seed", fit.seed, "Random seed")->required();
  c_fit->add_option("--out", fit.out, "Output directory")->required();
  fit.flags.add(c_fit);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Closed-loop movement generation from a coefficient file");
  c_gen->add_option("--model", gen.model, "Coefficient-exchange file")->required()->check(CLI::ExistingFile);
  c_gen->add_option("--seed-frames", gen.seed_frames, "CSV whose first two frames seed the rollout")
      ->required()
      ->check(CLI::ExistingFile);
  c_gen->add_option("--length", gen.length, "Frames to generate")->required()->check(CLI::Range(3, 100000000));
  c_gen->add_option("--out", gen.out, "Output CSV")->required();

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "MAE, RMSE and Theil U1 between two motion files");
  c_met->add_option("generated", met.generated, "Generated CSV")->required()->check(CLI::ExistingFile);
  c_met->add_option("truth", met.truth, "Reference CSV")->required()->check(CLI::ExistingFile);
  c_met->add_option("--topology", met.topology, "Topology JSON (reorders columns)")->check(CLI::ExistingFile);
  c_met->add_option("--out", met.out, "Also write metrics.json to this directory");

  AnalyzeArgs ana;
  auto* c_ana = app.add_subcommand("analyze", "Coefficient significance tests");
  c_ana->add_option("--model", ana.model, "Coefficient-exchange file")->required()->check(CLI::ExistingFile);
  c_ana->add_option("--out", ana.out, "Output directory")->required();
  c_ana->add_option("--level", ana.level, "Test level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_ana->add_option("--majority", ana.majority, "Fraction of time steps that must reject")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select-sensors", "Rank channels by significance and pick sensors");
  c_sel->add_option("--report", sel.reports, "significance.json from analyze (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  c_sel->add_option("--top-k", sel.top_k, "Channels kept before expanding to joints")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_sel->add_option("--out", sel.out, "Output directory")->required();

  ToleranceArgs tol;
  auto* c_tol = app.add_subcommand("tolerance", "Tolerance bands over aligned repetitions of a class");
  c_tol->add_option("--data", tol.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_tol->add_option("--class", tol.label, "Class label")->required();
  c_tol->add_option("--seed", tol.seed, "Random seed")->required();
  c_tol->add_option("--k-sigma", tol.k_sigma, "Band half-width in standard deviations")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_tol->add_option("--out", tol.out, "Output directory")->required();
  tol.flags.add(c_tol);

  RecognizeArgs rec;
  auto* c_rec = app.add_subcommand("recognize", "Cross-validated HMM recognition on a channel subset");
  c_rec->add_option("--data", rec.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_rec->add_option("--channels", rec.channels, "Comma-separated channels/joints, or sensors.json")->required();
  c_rec->add_option("--states", rec.states, "HMM states")->check(CLI::PositiveNumber)->capture_default_str();
  c_rec->add_option("--folds", rec.folds, "Cross-validation folds")->check(CLI::Range(2, 1000))->capture_default_str();
  c_rec->add_option("--seed", rec.seed, "Random seed")->required();
  c_rec->add_option("--out", rec.out, "Output directory")->required();

  ImportArgs imp;
  auto* c_imp = app.add_subcommand("import-coeffs", "Validate and import an externally trained coefficient file");
  c_imp->add_option("--in", imp.in, "Coefficient-exchange file")->required()->check(CLI::ExistingFile);
  c_imp->add_option("--topology", imp.topology, "Expected topology JSON")->check(CLI::ExistingFile);
  c_imp->add_option("--out", imp.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*c_synth) cmd_synth(synth, out);
    else if (*c_fit) cmd_fit(fit, out);
    else if (*c_gen) cmd_generate(gen, out);
    else if (*c_met) cmd_metrics(met, out);
    else if (*c_ana) cmd_analyze(ana, out);
    else if (*c_sel) cmd_select(sel, out);
    else if (*c_tol) cmd_tolerance(tol, out);
    else if (*c_rec) cmd_recognize(rec, out);
    else if (*c_imp) cmd_import(imp, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << one_line(e.what()) << '\n';
  } catch (const json::exception& e) {
    err << "error: validation: " << one_line(e.what()) << '\n';
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
  }
  return 1;
}

} // namespace gomkit::cli
