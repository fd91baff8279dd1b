#pragma once

// Per-pixel inversion of Z^i = a * C_i(r) + l for (r, a, l).

#include "gatedsim/formation.hpp"
#include "gatedsim/image.hpp"
#include "gatedsim/rip.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace gatedsim {

struct MaskStack;

struct PixelEstimate {
  double depth_r = 0.0;
  double albedo_a = 0.0;   // clamped to [0, 1]
  double ambient_l = 0.0;
  double residual = 0.0;   // sum of squared slice errors at the solution
  bool converged = false;
  bool albedo_clamped = false;  // solver albedo was above 1
  int iterations = 0;
};

struct DepthMap {
  ImageD depth;  // metres (range)
  Mask validity;
  std::vector<PixelEstimate> estimates;  // row-major, empty if not kept

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

struct SolverOptions {
  double r_min = 3.0;
  double r_max = 176.0;
  double albedo_max = 1.5;
  double grid_step = 0.5;       // lookup grid spacing, m
  double step_tolerance = 1e-3;  // m
  int max_iterations = 50;
  double theta = 0.04;           // unmodulated if slice range <= theta
  double gamma = 0.98;           // saturated if any slice >= gamma
  double passive_weight = 1.0;   // weight of (zp - l)^2 in the objective
  double max_residual = 1e-2;    // slice residual above this -> not converged
  double active_threshold = 0.01;  // C_i above this counts as an active gate
  ProfileMode mode = ProfileMode::kChebyshev;
};

/// Profile values on a fixed range grid, shared read-only by all solves.
class ProfileLookup {
 public:
  ProfileLookup(const ProfileSet& profiles, const SolverOptions& options = {});

  const ProfileSet& profiles() const { return profiles_; }
  const SolverOptions& options() const { return options_; }
  std::size_t size() const { return ranges_.size(); }
  double range(std::size_t i) const { return ranges_[i]; }
  const std::array<double, kNumSlices>& values(std::size_t i) const {
    return values_[i];
  }
  /// C_i(r) / sum_j C_j(r); zeros where the sum vanishes.
  const std::array<double, kNumSlices>& normalized(std::size_t i) const {
    return normalized_[i];
  }

  /// Ratio-based depth of one pixel (+inf when unmodulated).
  double ratio_depth(double z0, double z1, double z2, double zp) const;

 private:
  ProfileSet profiles_;
  SolverOptions options_;
  std::vector<double> ranges_;
  std::vector<std::array<double, kNumSlices>> values_;
  std::vector<std::array<double, kNumSlices>> normalized_;
};

inline constexpr double kNoSignalDepth = std::numeric_limits<double>::infinity();

/// Coarse depth r~ from the ambient-subtracted, sum-normalised slice triple,
/// matched against the normalised profiles on a 0.5 m grid (smallest r wins
/// ties). Pixels without modulation report +inf.
ImageD approx_depth_ratio(const GatedFrame& frame, const ProfileLookup& lookup,
                          int threads = 1);

PixelEstimate solve_pixel(double z0, double z1, double z2, double zp,
                          const ProfileLookup& lookup,
                          std::optional<double> init = std::nullopt);

/// Solves every pixel the final mask b admits (all pixels if `masks` is
/// null); validity = converged && b.
DepthMap solve_frame(const GatedFrame& frame, const ProfileLookup& lookup,
                     const MaskStack* masks = nullptr, int threads = 1,
                     bool keep_estimates = true);

/// Images of the recovered albedo and ambient (zero where not solved).
ImageD estimate_albedo(const DepthMap& map);
ImageD estimate_ambient(const DepthMap& map);

/// Number of profiles with C_i(r) above the active threshold.
int active_gate_count(const ProfileLookup& lookup, double r);

}  // namespace gatedsim
