#include "gatedsim/formation.hpp"

#include "gatedsim/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace gatedsim {
namespace {

constexpr double kNoHitRange = 1000.0;  // beyond every gate

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 stream whose starting state is a hash of the draw's coordinates.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::int64_t frame, int channel,
             std::size_t pixel) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ static_cast<std::uint64_t>(frame));
    h = mix64(h ^ (static_cast<std::uint64_t>(channel) << 56));
    state_ = mix64(h ^ static_cast<std::uint64_t>(pixel));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

double noisy_value(double z, const NoiseModel& noise, CounterRng& rng) {
  double v = z;
  if (std::isfinite(noise.poisson_scale)) {
    const double rate = noise.poisson_scale * std::max(0.0, z);
    long long k = 0;
    if (rate > 0.0) k = std::poisson_distribution<long long>(rate)(rng);
    v = static_cast<double>(k) / noise.poisson_scale;
  }
  if (noise.gaussian_sigma > 0.0) {
    v += std::normal_distribution<double>(0.0, noise.gaussian_sigma)(rng);
  }
  return std::clamp(v, 0.0, 1.0);
}

struct Patch {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(1e300);
  double albedo = 0.5;
  std::optional<double> ambient;
  double radius = 0.0;  // > 0: sphere of this radius centred at `point`
};

struct Hit {
  double range = kNoHitRange;
  double albedo = 0.0;
  std::optional<double> ambient;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

Hit cast(const std::vector<Patch>& patches, const Eigen::Vector3d& origin,
         const Eigen::Vector3d& dir) {
  Hit best;
  best.point = origin + kNoHitRange * dir.normalized();
  const double dir_norm = dir.norm();
  for (const auto& p : patches) {
    if (p.radius > 0.0) {
      const Eigen::Vector3d oc = origin - p.point;
      const double a = dir.squaredNorm();
      const double b = oc.dot(dir);
      const double disc = b * b - a * (oc.squaredNorm() - p.radius * p.radius);
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      double s = (-b - root) / a;
      if (!(s > 0.0)) s = (-b + root) / a;
      if (!(s > 0.0)) continue;
      const double range = s * dir_norm;
      if (range < best.range) best = {range, p.albedo, p.ambient, origin + s * dir};
      continue;
    }
    const double denom = dir.dot(p.normal);
    if (denom == 0.0) continue;
    const double s = (p.point - origin).dot(p.normal) / denom;
    if (!(s > 0.0)) continue;
    const Eigen::Vector3d q = origin + s * dir;
    if ((q.array() < p.lo.array()).any() || (q.array() > p.hi.array()).any()) {
      continue;
    }
    const double range = s * dir_norm;
    if (range < best.range) {
      best = {range, p.albedo, p.ambient, q};
    }
  }
  return best;
}

// Extent of an image-space rectangle at z-depth `z` for the identity pose.
Patch frontal_rect(const Intrinsics& k, double z, double u0, double u1,
                   double v0, double v1, double albedo) {
  Patch p;
  p.point = {0.0, 0.0, z};
  p.normal = {0.0, 0.0, 1.0};
  p.lo = {(u0 - k.cx) / k.fx * z, (v0 - k.cy) / k.fy * z, z - 1e-9};
  p.hi = {(u1 - k.cx) / k.fx * z, (v1 - k.cy) / k.fy * z, z + 1e-9};
  p.albedo = albedo;
  return p;
}

std::vector<Patch> build_world(SceneKind kind, const Intrinsics& k,
                               const SceneParams& sp) {
  const double w = k.width;
  const double h = k.height;
  Patch wall;
  wall.point = {0.0, 0.0, sp.wall_distance};
  wall.normal = {0.0, 0.0, 1.0};
  wall.albedo = sp.albedo;

  Patch ground;
  ground.point = {0.0, sp.camera_height, 0.0};
  ground.normal = {0.0, 1.0, 0.0};
  ground.albedo = sp.albedo;

  std::vector<Patch> out;
  switch (kind) {
    case SceneKind::kFlatWall: {
      // Equidistant from the world origin, so the reference camera sees a
      // constant range.
      Patch shell = wall;
      shell.point = Eigen::Vector3d::Zero();
      shell.radius = sp.wall_distance;
      out = {shell};
      break;
    }
    case SceneKind::kBoxes:
      for (int i = 0; i < 3; ++i) {
        const double z = sp.wall_distance * (0.3 + 0.2 * i);
        const double uc = (i + 0.5) / 3.0 * w;
        const double albedo =
            std::min(1.0, sp.albedo * (0.6 + 0.4 * i));
        out.push_back(frontal_rect(k, z, uc - w / 10.0, uc + w / 10.0,
                                   0.3 * h, 0.8 * h, albedo));
      }
      out.push_back(wall);
      break;
    case SceneKind::kGroundPlane:
      out = {ground, wall};
      break;
    case SceneKind::kRetroreflector: {
      // The sign's centre pixel sees it at range retro_distance.
      const double z = sp.retro_distance / pixel_bearing(k, 0.725 * w, 0.3 * h).norm();
      Patch sign = frontal_rect(k, z, 0.65 * w, 0.8 * w, 0.2 * h, 0.4 * h,
                                sp.retro_albedo);
      sign.ambient = sp.retro_ambient;
      Patch stripe = ground;
      stripe.lo = {sign.lo.x(), -1e300, 0.5 * z};
      stripe.hi = {sign.hi.x(), 1e300, z};
      stripe.albedo = sp.stripe_albedo;
      Patch backdrop = wall;
      backdrop.point.z() = std::max(sp.wall_distance, z + 20.0);
      out = {sign, stripe, ground, backdrop};
      break;
    }
    case SceneKind::kDepthRamp:
      break;
  }
  return out;
}

}  // namespace

SceneModel SceneModel::uniform(int width, int height, double albedo,
                               double depth, double ambient) {
  SceneModel s;
  s.width = width;
  s.height = height;
  s.albedo = ImageD(width, height, albedo);
  s.depth = ImageD(width, height, depth);
  s.ambient = ImageD(width, height, ambient);
  s.attenuation_beta = ImageD(width, height, 1.0);
  return s;
}

void SceneModel::validate(bool allow_super_unit_albedo) const {
  if (width <= 0 || height <= 0) {
    throw DimensionError("scene: dimensions must be positive");
  }
  const ImageD* images[] = {&albedo, &depth, &ambient, &attenuation_beta};
  for (const auto* img : images) {
    if (img->width() != width || img->height() != height) {
      throw DimensionError("scene: image dimensions differ from scene size");
    }
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!std::isfinite(depth[i]) || !(depth[i] > 0.0)) {
      throw std::invalid_argument("scene: depth must be finite and positive");
    }
    const double a = albedo[i];
    if (!(a >= 0.0) || (!allow_super_unit_albedo && a > 1.0)) {
      throw std::invalid_argument("scene: albedo out of range");
    }
    if (!(ambient[i] >= 0.0)) {
      throw std::invalid_argument("scene: ambient must be non-negative");
    }
    const double b = attenuation_beta[i];
    if (!(b > 0.0 && b <= 1.0)) {
      throw std::invalid_argument("scene: beta must lie in (0, 1]");
    }
  }
}

void NoiseModel::validate() const {
  if (!(gaussian_sigma >= 0.0)) {
    throw std::invalid_argument("noise: gaussian_sigma must be >= 0");
  }
  if (!(poisson_scale > 0.0)) {
    throw std::invalid_argument("noise: poisson_scale must be > 0");
  }
}

void GatedFrame::validate() const {
  for (const auto& s : slices) require_same_shape(s, passive, "gated frame");
}

GatedFrame render_noiseless(const SceneModel& scene, const ProfileSet& profiles,
                            ProfileMode mode, int threads) {
  scene.validate();
  const int w = scene.width;
  const int h = scene.height;
  GatedFrame frame;
  for (auto& s : frame.slices) s = ImageD(w, h);
  frame.passive = ImageD(w, h);
  parallel_rows(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double modulated = scene.albedo(x, y) * scene.attenuation_beta(x, y);
      const double ambient = scene.ambient(x, y);
      const double r = scene.depth(x, y);
      for (int i = 0; i < kNumSlices; ++i) {
        frame.slices[i](x, y) = std::clamp(
            modulated * profiles[i].eval(r, mode) + ambient, 0.0, 1.0);
      }
      frame.passive(x, y) = std::clamp(ambient, 0.0, 1.0);
    }
  });
  return frame;
}

GatedFrame apply_noise(const GatedFrame& frame, const NoiseModel& noise,
                       int threads) {
  noise.validate();
  frame.validate();
  if (noise.is_noiseless()) return frame;
  GatedFrame out = frame;
  const int w = frame.width();
  parallel_rows(frame.height(), threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pixel = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c <= kNumSlices; ++c) {
        ImageD& img = c < kNumSlices ? out.slices[c] : out.passive;
        CounterRng rng(noise.seed, frame.frame_id, c, pixel);
        img(x, y) = noisy_value(img(x, y), noise, rng);
      }
    }
  });
  return out;
}

std::optional<SceneKind> parse_scene_kind(std::string_view name) {
  if (name == "flat_wall") return SceneKind::kFlatWall;
  if (name == "depth_ramp") return SceneKind::kDepthRamp;
  if (name == "boxes") return SceneKind::kBoxes;
  if (name == "ground_plane_scene" || name == "ground_plane") {
    return SceneKind::kGroundPlane;
  }
  if (name == "retroreflector_scene" || name == "retroreflector") {
    return SceneKind::kRetroreflector;
  }
  return std::nullopt;
}

std::string_view scene_kind_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::kFlatWall: return "flat_wall";
    case SceneKind::kDepthRamp: return "depth_ramp";
    case SceneKind::kBoxes: return "boxes";
    case SceneKind::kGroundPlane: return "ground_plane_scene";
    case SceneKind::kRetroreflector: return "retroreflector_scene";
  }
  return "unknown";
}

SceneModel make_test_scene(SceneKind kind, int width, int height,
                           const SceneParams& params) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("make_test_scene: dimensions must be positive");
  }
  SceneModel scene = SceneModel::uniform(width, height, params.albedo, 1.0,
                                         params.ambient);

  if (kind == SceneKind::kDepthRamp) {
    if (!(params.ramp_near > 0.0 && params.ramp_far > params.ramp_near)) {
      throw std::invalid_argument("depth_ramp: need 0 < ramp_near < ramp_far");
    }
    for (int y = 0; y < height; ++y) {
      const double ty = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
      for (int x = 0; x < width; ++x) {
        const double tx =
            width > 1 ? 2.0 * x / (width - 1) - 1.0 : 0.0;
        scene.depth(x, y) =
            params.ramp_near + (params.ramp_far - params.ramp_near) * ty;
        scene.albedo(x, y) = params.albedo + params.albedo_spread * tx;
        scene.ambient(x, y) =
            std::max(0.0, params.ambient - params.ambient_spread * tx);
      }
    }
    scene.validate();
    return scene;
  }

  const Intrinsics k = params.intrinsics.value_or(Intrinsics::centered(width, height));
  k.validate();
  if (k.width != width || k.height != height) {
    throw DimensionError("make_test_scene: intrinsics size differs from scene");
  }
  params.camera_to_world.validate();
  const auto world = build_world(kind, k, params);
  const Eigen::Vector3d origin = params.camera_to_world.translation;
  const Eigen::Matrix3d& rot = params.camera_to_world.rotation;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Hit hit = cast(world, origin, rot * pixel_bearing(k, x, y));
      scene.depth(x, y) = hit.range;
      scene.albedo(x, y) = hit.range < kNoHitRange ? hit.albedo : 0.0;
      scene.ambient(x, y) = hit.ambient.value_or(std::max(
          0.0, params.ambient + params.ambient_gradient * hit.point.x()));
    }
  }
  scene.validate();
  return scene;
}

}  // namespace gatedsim
