#pragma once

// Forward image formation: Z^i = clamp(alpha * beta * C_i(r) + Lambda, 0, 1)
// with signal-dependent Poisson and additive Gaussian sensor noise.

#include "gatedsim/geometry.hpp"
#include "gatedsim/image.hpp"
#include "gatedsim/rip.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace gatedsim {

/// Per-pixel ground truth. `depth` is Euclidean range in metres.
struct SceneModel {
  int width = 0;
  int height = 0;
  ImageD albedo;
  ImageD depth;
  ImageD ambient;
  ImageD attenuation_beta;  // all ones unless fog-like attenuation is wanted

  /// Allocates all images with the given constants.
  static SceneModel uniform(int width, int height, double albedo, double depth,
                            double ambient);

  /// Throws DimensionError on shape mismatch and std::invalid_argument on
  /// out-of-range values (alpha may exceed 1 only when `allow_super_unit`).
  void validate(bool allow_super_unit_albedo = true) const;
};

struct NoiseModel {
  double gaussian_sigma = 0.002;
  double poisson_scale = 5000.0;  // photons per unit intensity
  std::uint64_t seed = 0;

  static NoiseModel noiseless() {
    return {0.0, std::numeric_limits<double>::infinity(), 0};
  }
  bool is_noiseless() const {
    return gaussian_sigma == 0.0 && poisson_scale == std::numeric_limits<double>::infinity();
  }
  void validate() const;
};

struct GatedFrame {
  std::array<ImageD, kNumSlices> slices;
  ImageD passive;
  double timestamp = 0.0;
  std::int64_t frame_id = 0;

  int width() const { return passive.width(); }
  int height() const { return passive.height(); }
  void validate() const;
};

GatedFrame render_noiseless(const SceneModel& scene, const ProfileSet& profiles,
                            ProfileMode mode = ProfileMode::kChebyshev,
                            int threads = 1);

/// Poisson(poisson_scale * Z) / poisson_scale + N(0, sigma^2), clamped to
/// [0, 1]. Every draw is keyed by (seed, frame_id, channel, pixel) so the
/// result does not depend on evaluation order or thread count.
GatedFrame apply_noise(const GatedFrame& frame, const NoiseModel& noise,
                       int threads = 1);

enum class SceneKind {
  kFlatWall,
  kDepthRamp,
  kBoxes,
  kGroundPlane,
  kRetroreflector,
};

std::optional<SceneKind> parse_scene_kind(std::string_view name);
std::string_view scene_kind_name(SceneKind kind);

/// Knobs for make_test_scene. Which ones apply depends on the kind:
///
///   flat_wall        surface at range wall_distance from the world origin;
///                    albedo, ambient, ambient_gradient
///   depth_ramp       ramp_near, ramp_far, albedo(+/-albedo_spread),
///                    ambient(+/-ambient_spread); depth grows down columns
///   boxes            backdrop at wall_distance plus three fronto-parallel
///                    boxes at 0.3, 0.5 and 0.7 of it
///   ground_plane     plane camera_height below the camera, far wall at
///                    wall_distance
///   retroreflector   ground_plane plus a sign of retro_albedo /
///                    retro_ambient at retro_distance and a bright ground
///                    stripe beneath it; the far wall sits behind the sign
///
/// World-defined kinds (all but depth_ramp) are ray cast from
/// `camera_to_world`, so moving the camera yields a consistent sequence.
/// Ambient is world-linear: ambient + ambient_gradient * X_world.
struct SceneParams {
  std::optional<Intrinsics> intrinsics;  // default Intrinsics::centered
  RigidPose camera_to_world = RigidPose::identity();
  double wall_distance = 50.0;
  double ramp_near = 5.0;
  double ramp_far = 150.0;
  double albedo = 0.5;
  double albedo_spread = 0.0;
  double ambient = 0.05;
  double ambient_spread = 0.0;
  double ambient_gradient = 0.0;
  double camera_height = 1.3;
  double retro_distance = 66.0;
  double retro_albedo = 5.0;
  double retro_ambient = 0.8;
  double stripe_albedo = 1.0;
};

SceneModel make_test_scene(SceneKind kind, int width, int height,
                           const SceneParams& params = {});

}  // namespace gatedsim
