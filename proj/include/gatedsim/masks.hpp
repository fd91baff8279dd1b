#pragma once

// Validity masks for the cyclic and temporal consistency terms.
//
//   D  = {max_i Z^i - min_i Z^i > theta}     modulated pixels
//   M  = {max_i Z^i < gamma}                 unsaturated pixels
//   b' = D & M
//   E  = {(r K^-1 x) . n < h}                back-projects below the ground
//   b  = b' & !E
//   S1 = {Z^0 >= c Z^2},  S2 = {Z^1 >= c Z^2},  m = S1 | S2
//   v  = {m & r < 2 median(r | m)}

#include "gatedsim/formation.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/image.hpp"
#include "gatedsim/rip.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>

namespace gatedsim {

struct MaskThresholds {
  double theta = 0.04;
  double gamma = 0.98;
  double c_ratio = 0.995;
  // y-down camera frame: the road 1.3 m below the camera is {p . n = h}.
  double plane_height = -1.3;
  Eigen::Vector3d plane_normal{0.0, -1.0, 0.0};
  double plane_tolerance = 1e-6;  // m; E needs p.n < h - tolerance
  bool literal_backprojection = false;  // use r K^-1 x instead of the ray

  void validate() const;
};

struct MaskStack {
  Mask D, M, b_prime, E, b, S1, S2, m, v;
  MaskThresholds thresholds;
  double s0 = 0.0;      // C0(s0) = c C2(s0)
  double s1 = 0.0;      // C1(s1) = c C2(s1)
  double r_bar = 0.0;   // median depth over m (NaN when m is empty)
  std::string diagnostic;  // non-empty when m selected no usable depth
};

Mask variance_mask(const GatedFrame& frame, double theta);
Mask saturation_mask(const GatedFrame& frame, double gamma);

/// Pixels whose back-projected point lies below the ground plane. Pixels with
/// invalid (or non-positive) depth are never flagged.
Mask multipath_mask(const ImageD& range, const Mask* validity,
                    const Intrinsics& intrinsics,
                    const MaskThresholds& thresholds);

struct CombinedMask {
  Mask b_prime;
  Mask b;
};
CombinedMask combine_b(const Mask& D, const Mask& M, const Mask& E);

/// Root of C_a(r) = c C_b(r) on the overlap of both visible ranges, found by
/// scanning for a sign change and bisecting. nullopt if there is none.
std::optional<double> profile_crossover(const RangeIntensityProfile& a,
                                        const RangeIntensityProfile& b,
                                        double c,
                                        ProfileMode mode = ProfileMode::kChebyshev);

struct InfinityMasks {
  Mask S1, S2, m, v;
  double s0 = 0.0;
  double s1 = 0.0;
  double r_bar = 0.0;
  std::string diagnostic;
};

InfinityMasks infinity_masks(const GatedFrame& frame, const ImageD& depth,
                             const Mask* validity, const ProfileSet& profiles,
                             const MaskThresholds& thresholds);

/// Median with the usual even-count convention (mean of the middle pair).
double median(std::vector<double> values);

/// Whole stack from a frame and a depth estimate (range).
MaskStack build_mask_stack(const GatedFrame& frame, const ImageD& depth,
                           const Mask* validity, const Intrinsics& intrinsics,
                           const ProfileSet& profiles,
                           const MaskThresholds& thresholds = {});

}  // namespace gatedsim
