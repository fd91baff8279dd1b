#pragma once

// Photometric loss L_p = 0.85 (1 - SSIM) / 2 + 0.15 |z - z_hat| and the
// cyclic / temporal consistency terms built on it.

#include "gatedsim/formation.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/image.hpp"
#include "gatedsim/rip.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

namespace gatedsim {

inline constexpr double kSsimWeight = 0.85;
inline constexpr double kL1Weight = 0.15;

struct SsimParams {
  int window = 7;        // odd box window
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  void validate() const;
};

/// How a mask enters L_p.
///  kRestricted: statistics on the raw images, mean over pixels whose whole
///               window lies inside the mask.
///  kLiteral:    both images multiplied by the mask first (b ⊙ Z), mean over
///               pixels whose centre lies inside the mask.
enum class MaskMode { kRestricted, kLiteral };

/// SSIM on interior pixels; the border (window / 2 wide) is not valid.
struct SsimMap {
  ImageD values;
  Mask valid;
};
SsimMap ssim(const ImageD& a, const ImageD& b, const SsimParams& params = {});

/// SSIM of two constant images (zero variance).
double constant_image_ssim(double mu1, double mu2, const SsimParams& params = {});

inline double photometric_pixel(double ssim_value, double abs_error) {
  return kSsimWeight * (1.0 - ssim_value) / 2.0 + kL1Weight * abs_error;
}

struct LossField {
  ImageD value;
  Mask valid;
};

LossField photometric_field(const ImageD& z, const ImageD& z_hat,
                            const Mask* mask, const SsimParams& params = {},
                            MaskMode mode = MaskMode::kRestricted);

struct LossReport {
  double total = 0.0;
  std::array<double, kNumSlices> per_slice{};
  double ambient_term = 0.0;
  std::size_t valid_pixel_count = 0;
  std::string diagnostic;           // set when nothing was aggregated
  std::optional<ImageD> gradient;   // d total / d depth, if requested
};

/// Mean of the per-pixel field over its valid pixels (0 if none).
double field_mean(const LossField& field, std::size_t* count = nullptr);

LossReport photometric_loss(const ImageD& z, const ImageD& z_hat,
                            const Mask* mask, const SsimParams& params = {},
                            MaskMode mode = MaskMode::kRestricted);

/// Per-pixel (depth, albedo, ambient) estimate. depth is range in metres.
struct SceneEstimate {
  ImageD depth;
  ImageD albedo;
  ImageD ambient;
};

/// Z_hat^i = albedo * C_i(depth) + ambient, unclamped.
std::array<ImageD, kNumSlices> reconstruct_slices(const SceneEstimate& est,
                                                  const ProfileSet& profiles,
                                                  ProfileMode mode);

struct CyclicLossOptions {
  SsimParams ssim{};
  MaskMode mask_mode = MaskMode::kRestricted;
  ProfileMode profile_mode = ProfileMode::kChebyshev;
  bool with_gradient = false;
};

/// sum_i L_p(b ⊙ Z^i, b ⊙ Z_hat^i) + L_p(Lambda_hat, Z^p). A null mask admits
/// every pixel.
LossReport cyclic_loss(const GatedFrame& frame, const SceneEstimate& est,
                       const ProfileSet& profiles, const Mask* mask_b,
                       const CyclicLossOptions& options = {});

/// Analytic d L_cyc / d depth for every pixel.
ImageD cyclic_loss_depth_gradient(const GatedFrame& frame,
                                  const SceneEstimate& est,
                                  const ProfileSet& profiles, const Mask* mask_b,
                                  const CyclicLossOptions& options = {});

/// Central differences of `loss` w.r.t. each depth pixel where `pixels` is
/// set (all pixels when null).
ImageD finite_difference_gradient(
    const std::function<double(const ImageD&)>& loss, const ImageD& depth,
    double h, const Mask* pixels = nullptr);

struct TemporalNeighbor {
  const GatedFrame* frame = nullptr;
  RigidPose target_to_neighbor;  // maps points in frame t into the neighbour
};

struct TemporalLossResult {
  LossReport report;
  ImageD per_pixel;                      // min over pairs
  Mask valid;                            // pixels with at least one pair
  std::array<LossField, 2> pair_fields;  // summed over slices, per neighbour
};

/// Min-reprojection loss: per pixel, min over neighbours of
/// sum_i L_p(v ⊙ Z^i_t, v ⊙ Z_hat^i_t(n)). `range` is the depth of frame t
/// (Euclidean range; converted to z-depth for the warp).
TemporalLossResult temporal_loss(const GatedFrame& frame_t,
                                 const std::array<TemporalNeighbor, 2>& neighbors,
                                 const ImageD& range, const Mask* mask_v,
                                 const Intrinsics& intrinsics,
                                 const SsimParams& params = {},
                                 MaskMode mode = MaskMode::kRestricted);

}  // namespace gatedsim
