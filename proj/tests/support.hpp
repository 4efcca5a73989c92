#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "gomkit/gomkit.hpp"

namespace gomkit::fixtures {

inline SkeletonTopology single_joint_topology() {
  SkeletonTopology::Parts p;
  p.joints = {"J"};
  p.limbs = {{"spine", {"J"}}};
  return SkeletonTopology(std::move(p));
}

inline SkeletonTopology two_joint_topology() {
  SkeletonTopology::Parts p;
  p.joints = {"H", "SP"};
  p.parent = {{"SP", "H"}};
  p.limbs = {{"spine", {"H", "SP"}}};
  return SkeletonTopology(std::move(p));
}

/// Hips, spine, both arms and both upper legs: 6 joints, 18 channels.
inline SkeletonTopology mini6_topology() {
  SkeletonTopology::Parts p;
  p.joints = {"H", "SP", "LA", "RA", "LUL", "RUL"};
  p.parent = {{"SP", "H"}, {"LA", "SP"}, {"RA", "SP"}, {"LUL", "H"}, {"RUL", "H"}};
  p.limbs = {{"spine", {"H", "SP"}},
             {"left-arm", {"LA"}},
             {"right-arm", {"RA"}},
             {"left-leg", {"LUL"}},
             {"right-leg", {"RUL"}}};
  return SkeletonTopology(std::move(p));
}

/// A class whose every channel is an undamped (or lightly damped) oscillator
/// with its own frequency, amplitude and phase, drawn from `seed`.
inline SynthClass oscillator_class(const SkeletonTopology& topo, const std::string& label, std::uint64_t seed,
                                   double fps = 90.0, double radius = 1.0, double f_lo = 0.3, double f_hi = 1.2) {
  Rng rng(seed);
  std::uniform_real_distribution<double> freq(f_lo, f_hi), amp(10.0, 40.0), phase(0.0, 6.283185307179586);
  SynthClass cls;
  cls.label = label;
  for (std::size_t c = 0; c < topo.channel_count(); ++c)
    cls.channels[c] = ChannelDynamics::oscillator(freq(rng), amp(rng), phase(rng), fps, radius);
  return cls;
}

inline PostureSequence sequence_from(const FrameMatrix& frames, const SkeletonTopology& topo,
                                     std::string label = {}) {
  return PostureSequence(frames, topo.channel_names(), 90.0, std::move(label));
}

inline FrameMatrix random_frames(std::size_t t, std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  FrameMatrix f(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = normal(rng);
  return f;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gomkit-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace gomkit::fixtures
namespace fx = gomkit::fixtures;
