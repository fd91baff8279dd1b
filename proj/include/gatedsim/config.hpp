#pragma once

// Human-readable configuration documents (YAML). Every section rejects keys
// it does not know. Numbers are written as shortest round-trip decimal text,
// so a write/read cycle reproduces every double bit for bit.
//
//   profiles:
//     - slice_index: 0
//       timing: {delay_xi: ..., gate_duration: ..., pulse_duration: ...,
//                gate_edge: ..., peak_response: 1}
//       domain: [r_lo, r_hi]
//       chebyshev: [c0, c1, c2, c3, c4, c5, c6]
//   intrinsics: {fx: ..., fy: ..., cx: ..., cy: ..., width: ..., height: ...}
//   noise: {gaussian_sigma: 0.002, poisson_scale: 5000, seed: 0}
//   thresholds: {theta: 0.04, gamma: 0.98, c: 0.995, plane_height: -1.3,
//                plane_normal: [0, -1, 0]}
//   scene: {kind: flat_wall, width: 256, height: 128, params: {...}}
//   sequence: {frames: 1, translation: [0, 0, 0], frame_interval: 0.0333}

#include "gatedsim/formation.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/masks.hpp"
#include "gatedsim/rip.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace gatedsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SequenceConfig {
  int frames = 1;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // per frame, world
  double frame_interval = 1.0 / 30.0;                     // s
};

struct SceneConfig {
  SceneKind kind = SceneKind::kFlatWall;
  int width = 256;
  int height = 128;
  SceneParams params;
  Intrinsics intrinsics;
  NoiseModel noise = NoiseModel::noiseless();
  SequenceConfig sequence;
};

/// A parsed document; sections are extracted on demand.
class ConfigDocument {
 public:
  static ConfigDocument load(const std::filesystem::path& path);
  static ConfigDocument parse(const std::string& text);

  /// Throws ConfigError if the top level holds a key outside `allowed`.
  void require_only(std::initializer_list<const char*> allowed) const;
  bool has(const std::string& section) const;

  ProfileSet profiles() const;
  Intrinsics intrinsics() const;
  NoiseModel noise() const;
  MaskThresholds thresholds() const;
  SceneConfig scene() const;

  ~ConfigDocument();
  ConfigDocument(ConfigDocument&&) noexcept;
  ConfigDocument& operator=(ConfigDocument&&) noexcept;

 private:
  ConfigDocument();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string profiles_to_text(const ProfileSet& profiles);
std::string intrinsics_to_text(const Intrinsics& k);
std::string noise_to_text(const NoiseModel& noise);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gatedsim
