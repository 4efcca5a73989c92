#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gomkit/diagnostics.hpp"
#include "gomkit/error.hpp"
#include "gomkit/text.hpp"
#include "gomkit/topology.hpp"

namespace gomkit {

/// Frames are rows: T x N, row-major so a posture is contiguous.
using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultFrameRateHz = 90.0;
inline constexpr std::size_t kMinSequenceFrames = 3;

/// A recorded (or generated) movement: Euler joint angles in degrees.
class PostureSequence {
public:
  PostureSequence() = default;

  PostureSequence(FrameMatrix frames, std::vector<std::string> channel_names,
                  double frame_rate_hz = kDefaultFrameRateHz, std::string class_label = {},
                  std::string subject_id = {})
      : frames_(std::move(frames)), channel_names_(std::move(channel_names)),
        frame_rate_hz_(frame_rate_hz), class_label_(std::move(class_label)),
        subject_id_(std::move(subject_id)) {
    if (static_cast<std::size_t>(frames_.cols()) != channel_names_.size())
      throw ShapeError("frame width " + std::to_string(frames_.cols()) + " does not match " +
                       std::to_string(channel_names_.size()) + " channel names");
    if (static_cast<std::size_t>(frames_.rows()) < kMinSequenceFrames)
      throw ValidationError("sequence needs at least 3 frames, got " + std::to_string(frames_.rows()));
    if (!(frame_rate_hz_ > 0.0) || !std::isfinite(frame_rate_hz_))
      throw ValidationError("frame rate must be positive");
    for (Eigen::Index t = 0; t < frames_.rows(); ++t)
      for (Eigen::Index c = 0; c < frames_.cols(); ++c)
        if (!std::isfinite(frames_(t, c)))
          throw ValidationError("non-finite value at frame " + std::to_string(t) + ", channel " +
                                channel_names_[static_cast<std::size_t>(c)]);
  }

  const FrameMatrix& frames() const { return frames_; }
  std::size_t length() const { return static_cast<std::size_t>(frames_.rows()); }
  std::size_t channel_count() const { return static_cast<std::size_t>(frames_.cols()); }
  const std::vector<std::string>& channel_names() const { return channel_names_; }
  double frame_rate_hz() const { return frame_rate_hz_; }
  const std::string& class_label() const { return class_label_; }
  const std::string& subject_id() const { return subject_id_; }

  double at(std::size_t t, std::size_t c) const {
    return frames_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
  }
  auto frame(std::size_t t) const { return frames_.row(static_cast<Eigen::Index>(t)); }

  PostureSequence with_labels(std::string class_label, std::string subject_id) const {
    PostureSequence copy = *this;
    copy.class_label_ = std::move(class_label);
    copy.subject_id_ = std::move(subject_id);
    return copy;
  }

  bool operator==(const PostureSequence& o) const {
    return frames_ == o.frames_ && channel_names_ == o.channel_names_ &&
           frame_rate_hz_ == o.frame_rate_hz_ && class_label_ == o.class_label_ &&
           subject_id_ == o.subject_id_;
  }

private:
  FrameMatrix frames_;
  std::vector<std::string> channel_names_;
  double frame_rate_hz_ = kDefaultFrameRateHz;
  std::string class_label_;
  std::string subject_id_;
};

inline void require_same_channels(const PostureSequence& a, const PostureSequence& b) {
  if (a.channel_names() != b.channel_names())
    throw ShapeError("channel mismatch between sequences");
}

/// Per-class corpora sharing one topology.
class MovementDataset {
public:
  MovementDataset() = default;

  MovementDataset(std::vector<PostureSequence> sequences, SkeletonTopology topology)
      : sequences_(std::move(sequences)), topology_(std::move(topology)) {
    const auto names = topology_.channel_names();
    for (const auto& s : sequences_)
      if (s.channel_names() != names)
        throw ValidationError("sequence channels do not match the dataset topology");
  }

  const std::vector<PostureSequence>& sequences() const { return sequences_; }
  const SkeletonTopology& topology() const { return topology_; }
  std::size_t size() const { return sequences_.size(); }
  const PostureSequence& operator[](std::size_t i) const { return sequences_.at(i); }

  /// Class labels in order of first appearance.
  std::vector<std::string> class_labels() const {
    std::vector<std::string> labels;
    for (const auto& s : sequences_)
      if (std::find(labels.begin(), labels.end(), s.class_label()) == labels.end())
        labels.push_back(s.class_label());
    return labels;
  }

  std::vector<std::size_t> indices_of(const std::string& label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sequences_.size(); ++i)
      if (sequences_[i].class_label() == label) idx.push_back(i);
    return idx;
  }

  MovementDataset subset(const std::vector<std::size_t>& indices) const {
    std::vector<PostureSequence> seqs;
    seqs.reserve(indices.size());
    for (auto i : indices) seqs.push_back(sequences_.at(i));
    return MovementDataset(std::move(seqs), topology_);
  }

private:
  std::vector<PostureSequence> sequences_;
  SkeletonTopology topology_;
};

/// Raw contents of a motion CSV before validation against a topology.
struct MotionTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  double frame_rate_hz = kDefaultFrameRateHz;
};

inline MotionTable parse_motion_csv(std::istream& in, const std::string& source = "<stream>") {
  MotionTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      auto body = text::trim(trimmed.substr(1));
      if (body.rfind("fps=", 0) == 0) {
        auto fps = text::parse_double(body.substr(4));
        if (!fps || !(*fps > 0.0)) throw ValidationError(source + ": invalid fps comment");
        table.frame_rate_hz = *fps;
      }
      continue;
    }
    auto cells = text::split(trimmed, ',');
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(text::trim(c));
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ValidationError(source + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    const std::size_t frame = table.rows.size();
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = text::parse_double(cells[c]);
      if (!v)
        throw ValidationError(source + ": non-numeric value at row " + std::to_string(frame) +
                              ", channel " + table.header[c]);
      if (!std::isfinite(*v))
        throw ValidationError(source + ": NaN or infinite value at row " + std::to_string(frame) +
                              ", channel " + table.header[c]);
      row.push_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw ValidationError(source + ": missing header row");
  return table;
}

/// Maps the table's columns to topology channel order. Extra columns are rejected.
inline FrameMatrix table_to_frames(const MotionTable& table, const SkeletonTopology& topology,
                                   const std::string& source = "<stream>") {
  const std::size_t n = topology.channel_count();
  std::vector<std::ptrdiff_t> column_of(n, -1);
  for (std::size_t col = 0; col < table.header.size(); ++col) {
    auto c = topology.find_channel(table.header[col]);
    if (!c) throw ValidationError(source + ": unknown channel '" + table.header[col] + "' in header");
    if (column_of[*c] >= 0)
      throw ValidationError(source + ": duplicate channel '" + table.header[col] + "' in header");
    column_of[*c] = static_cast<std::ptrdiff_t>(col);
  }
  for (std::size_t c = 0; c < n; ++c)
    if (column_of[c] < 0) throw ValidationError(source + ": missing channel '" + topology.channel_name(c) + "'");

  FrameMatrix frames(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < table.rows.size(); ++t)
    for (std::size_t c = 0; c < n; ++c)
      frames(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) =
          table.rows[t][static_cast<std::size_t>(column_of[c])];
  return frames;
}

inline void warn_on_discontinuities(const FrameMatrix& frames, const std::vector<std::string>& names,
                                    const std::string& source) {
  for (Eigen::Index t = 1; t < frames.rows(); ++t)
    for (Eigen::Index c = 0; c < frames.cols(); ++c)
      if (std::abs(frames(t, c) - frames(t - 1, c)) > 180.0) {
        warn(source + ": jump above 180 degrees at frame " + std::to_string(t) + ", channel " +
             names[static_cast<std::size_t>(c)]);
        return;
      }
}

inline PostureSequence load_motion_csv(const std::filesystem::path& path, const SkeletonTopology& topology,
                                       std::string class_label = {}, std::string subject_id = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open motion file " + path.string());
  const auto source = path.string();
  auto table = parse_motion_csv(in, source);
  if (table.rows.size() < kMinSequenceFrames)
    throw ValidationError(source + ": sequence needs at least 3 frames, got " + std::to_string(table.rows.size()));
  auto frames = table_to_frames(table, topology, source);
  auto names = topology.channel_names();
  warn_on_discontinuities(frames, names, source);
  return PostureSequence(std::move(frames), std::move(names), table.frame_rate_hz, std::move(class_label),
                         std::move(subject_id));
}

inline void write_motion_csv(std::ostream& out, const FrameMatrix& frames, const std::vector<std::string>& names,
                             double frame_rate_hz) {
  out << "# fps=" << text::format_double(frame_rate_hz) << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) out << (c ? "," : "") << text::format_double(frames(t, c));
    out << '\n';
  }
}

inline void save_motion_csv(const std::filesystem::path& path, const PostureSequence& seq) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write motion file " + path.string());
  write_motion_csv(out, seq.frames(), seq.channel_names(), seq.frame_rate_hz());
}

// Dataset directories: dataset.json + topology.json + one CSV per sequence.

inline constexpr const char* kDatasetManifest = "dataset.json";
inline constexpr const char* kTopologyFile = "topology.json";

inline void save_dataset(const std::filesystem::path& dir, const MovementDataset& dataset) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / kTopologyFile);
    out << dataset.topology().to_json().dump(2) << '\n';
  }
  nlohmann::json manifest;
  manifest["topology"] = kTopologyFile;
  manifest["sequences"] = nlohmann::json::array();
  std::map<std::string, std::size_t> counter;
  for (const auto& s : dataset.sequences()) {
    const auto rep = counter[s.class_label()]++;
    std::ostringstream name;
    name << s.class_label() << '_' << std::setw(3) << std::setfill('0') << rep << ".csv";
    save_motion_csv(dir / name.str(), s);
    manifest["sequences"].push_back({{"file", name.str()}, {"class", s.class_label()}, {"subject", s.subject_id()}});
  }
  std::ofstream out(dir / kDatasetManifest);
  out << manifest.dump(2) << '\n';
}

inline SkeletonTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open topology file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return SkeletonTopology::from_json(j);
}

inline MovementDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / kDatasetManifest);
  if (!in) throw ValidationError("no dataset manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / kDatasetManifest).string() + ": " + e.what());
  }
  const auto topo_file = manifest.value("topology", std::string(kTopologyFile));
  auto topology = load_topology(dir / topo_file);
  std::vector<PostureSequence> seqs;
  for (const auto& entry : manifest.at("sequences")) {
    seqs.push_back(load_motion_csv(dir / entry.at("file").get<std::string>(), topology,
                                   entry.value("class", std::string{}), entry.value("subject", std::string{})));
  }
  return MovementDataset(std::move(seqs), std::move(topology));
}

} // namespace gomkit
