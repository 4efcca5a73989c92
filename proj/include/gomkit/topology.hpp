#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gomkit/error.hpp"

namespace gomkit {

enum class Axis : std::size_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::X, Axis::Y, Axis::Z};
inline constexpr std::size_t kAxisCount = 3;

inline char axis_letter(Axis a) { return "xyz"[static_cast<std::size_t>(a)]; }

/// Joint graph of the capture skeleton. Channels are numbered
/// `joint_index * 3 + axis`, so channel order follows joint order.
class SkeletonTopology {
public:
  struct Parts {
    std::vector<std::string> joints;
    std::map<std::string, std::string> parent;             // child -> parent; root omitted
    std::map<std::string, std::vector<std::string>> limbs; // limb group -> member joints
    // Optional overrides. Missing keys fall back to the default rules:
    // mirror = swap a leading L/R when the counterpart lives in another limb,
    // nonserial = joints exactly two hops up or down the parent chain.
    std::map<std::string, std::string> mirror;
    std::map<std::string, std::vector<std::string>> nonserial;
  };

  SkeletonTopology() = default;

  explicit SkeletonTopology(Parts parts) { build(std::move(parts)); }

  /// 19-sensor full-body skeleton (fingers and feet excluded), 57 channels.
  static SkeletonTopology default_body() {
    Parts p;
    p.joints = {"H",    "SP",   "SP1", "SP2", "SP3", "NK",  "HD",  "LSH1", "LSH2", "LA",
                "LFA",  "RSH1", "RSH2", "RA",  "RFA", "LUL", "LCA", "RUL",  "RCA"};
    p.parent = {{"SP", "H"},     {"SP1", "SP"},    {"SP2", "SP1"},   {"SP3", "SP2"},
                {"NK", "SP3"},   {"HD", "NK"},     {"LSH1", "SP3"},  {"LSH2", "LSH1"},
                {"LA", "LSH2"},  {"LFA", "LA"},    {"RSH1", "SP3"},  {"RSH2", "RSH1"},
                {"RA", "RSH2"},  {"RFA", "RA"},    {"LUL", "H"},     {"LCA", "LUL"},
                {"RUL", "H"},    {"RCA", "RUL"}};
    p.limbs = {{"spine", {"H", "SP", "SP1", "SP2", "SP3", "NK", "HD"}},
               {"left-arm", {"LSH1", "LSH2", "LA", "LFA"}},
               {"right-arm", {"RSH1", "RSH2", "RA", "RFA"}},
               {"left-leg", {"LUL", "LCA"}},
               {"right-leg", {"RUL", "RCA"}}};
    return SkeletonTopology(std::move(p));
  }

  std::size_t joint_count() const { return joints_.size(); }
  std::size_t channel_count() const { return joints_.size() * kAxisCount; }
  const std::vector<std::string>& joints() const { return joints_; }
  const std::string& joint_name(std::size_t j) const { return joints_.at(j); }

  std::optional<std::size_t> find_joint(std::string_view name) const {
    auto it = std::find(joints_.begin(), joints_.end(), name);
    if (it == joints_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - joints_.begin());
  }

  std::size_t joint_index(std::string_view name) const {
    auto j = find_joint(name);
    if (!j) throw NotFoundError("unknown joint '" + std::string(name) + "'");
    return *j;
  }

  std::size_t root() const { return root_; }
  std::optional<std::size_t> parent(std::size_t j) const { return parent_.at(j); }
  const std::vector<std::size_t>& children(std::size_t j) const { return children_.at(j); }
  const std::string& limb_of(std::size_t j) const { return limb_of_.at(j); }
  std::optional<std::size_t> mirror(std::size_t j) const { return mirror_.at(j); }
  const std::vector<std::size_t>& nonserial(std::size_t j) const { return nonserial_.at(j); }

  static std::size_t channel(std::size_t joint, Axis axis) {
    return joint * kAxisCount + static_cast<std::size_t>(axis);
  }
  static std::size_t joint_of_channel(std::size_t c) { return c / kAxisCount; }
  static Axis axis_of_channel(std::size_t c) { return static_cast<Axis>(c % kAxisCount); }

  std::string channel_name(std::size_t c) const {
    return joints_.at(joint_of_channel(c)) + "." + axis_letter(axis_of_channel(c));
  }

  std::vector<std::string> channel_names() const {
    std::vector<std::string> names;
    names.reserve(channel_count());
    for (std::size_t c = 0; c < channel_count(); ++c) names.push_back(channel_name(c));
    return names;
  }

  std::optional<std::size_t> find_channel(std::string_view name) const {
    const auto dot = name.rfind('.');
    if (dot == std::string_view::npos || dot + 2 != name.size()) return std::nullopt;
    auto j = find_joint(name.substr(0, dot));
    if (!j) return std::nullopt;
    switch (name.back()) {
      case 'x': case 'X': return channel(*j, Axis::X);
      case 'y': case 'Y': return channel(*j, Axis::Y);
      case 'z': case 'Z': return channel(*j, Axis::Z);
      default: return std::nullopt;
    }
  }

  std::size_t channel_index(std::string_view name) const {
    auto c = find_channel(name);
    if (!c) throw NotFoundError("unknown channel '" + std::string(name) + "'");
    return *c;
  }

  /// Number of parent hops from the root.
  std::size_t depth(std::size_t j) const {
    std::size_t d = 0;
    for (auto p = parent_.at(j); p; p = parent_.at(*p)) ++d;
    return d;
  }

  const Parts& parts() const { return parts_; }

  bool operator==(const SkeletonTopology& other) const {
    return joints_ == other.joints_ && parent_ == other.parent_ && limb_of_ == other.limb_of_ &&
           mirror_ == other.mirror_ && nonserial_ == other.nonserial_;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["joints"] = joints_;
    nlohmann::json parent = nlohmann::json::object();
    for (std::size_t i = 0; i < joints_.size(); ++i)
      if (parent_[i]) parent[joints_[i]] = joints_[*parent_[i]];
    j["parent"] = parent;
    nlohmann::json limbs = nlohmann::json::object();
    for (const auto& [limb, members] : parts_.limbs) limbs[limb] = members;
    j["limbs"] = limbs;
    if (!parts_.mirror.empty()) j["mirror"] = parts_.mirror;
    if (!parts_.nonserial.empty()) j["nonserial"] = parts_.nonserial;
    return j;
  }

  static SkeletonTopology from_json(const nlohmann::json& j) {
    try {
      Parts p;
      p.joints = j.at("joints").get<std::vector<std::string>>();
      if (j.contains("parent")) p.parent = j.at("parent").get<std::map<std::string, std::string>>();
      p.limbs = j.at("limbs").get<std::map<std::string, std::vector<std::string>>>();
      if (j.contains("mirror")) p.mirror = j.at("mirror").get<std::map<std::string, std::string>>();
      if (j.contains("nonserial"))
        p.nonserial = j.at("nonserial").get<std::map<std::string, std::vector<std::string>>>();
      return SkeletonTopology(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed topology document: ") + e.what());
    }
  }

private:
  void build(Parts parts) {
    parts_ = std::move(parts);
    joints_ = parts_.joints;
    const std::size_t n = joints_.size();
    if (n == 0) throw ValidationError("topology has no joints");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& name = joints_[i];
      if (name.empty() || name.find_first_of(".,# \t") != std::string::npos)
        throw ValidationError("invalid joint name '" + name + "'");
      if (std::find(joints_.begin(), joints_.begin() + static_cast<std::ptrdiff_t>(i), name) !=
          joints_.begin() + static_cast<std::ptrdiff_t>(i))
        throw ValidationError("duplicate joint '" + name + "'");
    }

    parent_.assign(n, std::nullopt);
    children_.assign(n, {});
    for (const auto& [child, par] : parts_.parent) {
      auto c = find_joint(child);
      auto p = find_joint(par);
      if (!c || !p) throw ValidationError("parent entry references unknown joint: " + child + " -> " + par);
      if (*c == *p) throw ValidationError("joint '" + child + "' is its own parent");
      parent_[*c] = *p;
    }
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!parent_[i]) {
        root_ = i;
        ++roots;
      } else {
        children_[*parent_[i]].push_back(i);
      }
    }
    if (roots != 1) throw ValidationError("parent relation must form a single tree (found " +
                                          std::to_string(roots) + " roots)");
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t steps = 0;
      for (auto p = parent_[i]; p; p = parent_[*p])
        if (++steps > n) throw ValidationError("parent relation contains a cycle at '" + joints_[i] + "'");
    }
    for (auto& ch : children_) std::sort(ch.begin(), ch.end());

    limb_of_.assign(n, std::string{});
    for (const auto& [limb, members] : parts_.limbs) {
      for (const auto& m : members) {
        auto j = find_joint(m);
        if (!j) throw ValidationError("limb '" + limb + "' references unknown joint '" + m + "'");
        if (!limb_of_[*j].empty())
          throw ValidationError("joint '" + m + "' belongs to more than one limb group");
        limb_of_[*j] = limb;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (limb_of_[i].empty()) throw ValidationError("joint '" + joints_[i] + "' has no limb group");

    mirror_.assign(n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& name = joints_[i];
      if (auto it = parts_.mirror.find(name); it != parts_.mirror.end()) {
        auto m = find_joint(it->second);
        if (!m) throw ValidationError("mirror entry references unknown joint '" + it->second + "'");
        if (*m == i) throw ValidationError("joint '" + name + "' mirrors itself");
        mirror_[i] = *m;
        continue;
      }
      if (name.size() < 2 || (name[0] != 'L' && name[0] != 'R')) continue;
      std::string swapped = name;
      swapped[0] = name[0] == 'L' ? 'R' : 'L';
      if (auto m = find_joint(swapped); m && limb_of_[*m] != limb_of_[i]) mirror_[i] = *m;
    }
    for (std::size_t i = 0; i < n; ++i)
      if (mirror_[i] && mirror_[*mirror_[i]] != i)
        throw ValidationError("mirror relation is not symmetric at '" + joints_[i] + "'");

    nonserial_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      auto& out = nonserial_[i];
      if (auto it = parts_.nonserial.find(joints_[i]); it != parts_.nonserial.end()) {
        for (const auto& m : it->second) {
          auto j = find_joint(m);
          if (!j) throw ValidationError("nonserial entry references unknown joint '" + m + "'");
          if (*j != i) out.push_back(*j);
        }
      } else {
        if (parent_[i] && parent_[*parent_[i]]) out.push_back(*parent_[*parent_[i]]);
        for (auto c : children_[i])
          for (auto g : children_[c]) out.push_back(g);
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }

  Parts parts_;
  std::vector<std::string> joints_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::string> limb_of_;
  std::vector<std::optional<std::size_t>> mirror_;
  std::vector<std::vector<std::size_t>> nonserial_;
  std::size_t root_ = 0;
};

} // namespace gomkit
