#pragma once

// Pinhole intrinsics, rigid poses and the view-synthesis warp.
//
// Depth conventions: `backproject` takes a z-depth (r * K^-1 [x y 1]^T with
// unit z in the bearing), `backproject_range` takes a Euclidean range along
// the pixel ray. Gated profiles are functions of range, the warp consumes
// z-depth; `range_to_zdepth` / `zdepth_to_range` convert per pixel.

#include "gatedsim/image.hpp"

#include <Eigen/Core>

namespace gatedsim {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws std::invalid_argument on non-positive focal lengths, empty image
  /// or a principal point outside the image.
  void validate() const;

  Eigen::Matrix3d K() const;
  Eigen::Matrix3d K_inv() const;

  /// fx = fy = width, principal point at the image centre.
  static Intrinsics centered(int width, int height);
};

/// Rigid transform p' = R p + t.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidPose identity() { return {}; }
  static RigidPose from_matrix(const Eigen::Matrix4d& m);

  /// Throws std::invalid_argument unless R is orthonormal with det +1
  /// (tolerance 1e-9).
  void validate() const;

  bool is_identity() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  Eigen::Matrix4d matrix() const;
  RigidPose inverse() const;
};

/// a ∘ b: apply b first, then a.
RigidPose compose(const RigidPose& a, const RigidPose& b);

/// Pose that maps points in camera `from` into camera `to`, given both
/// camera-to-world poses.
RigidPose relative_pose(const RigidPose& world_from_cam_from,
                        const RigidPose& world_from_cam_to);

Eigen::Vector3d pixel_bearing(const Intrinsics& k, double x, double y);
Eigen::Vector3d backproject(const Intrinsics& k, double x, double y,
                            double depth);
Eigen::Vector3d backproject_range(const Intrinsics& k, double x, double y,
                                  double range);
Eigen::Vector2d project(const Intrinsics& k, const Eigen::Vector3d& p);

double range_to_zdepth(const Intrinsics& k, double x, double y, double range);
double zdepth_to_range(const Intrinsics& k, double x, double y, double zdepth);
ImageD range_to_zdepth(const Intrinsics& k, const ImageD& range);
ImageD zdepth_to_range(const Intrinsics& k, const ImageD& zdepth);

/// Per-pixel source coordinates in the neighbour view.
struct WarpField {
  ImageD x;
  ImageD y;
  Mask in_view;  // false where depth was invalid or the point is behind
                 // the neighbour camera
};

/// x_n ~ K X r K^-1 x_t for every pixel of a z-depth map. Pixels with
/// non-positive or non-finite depth, or with validity false, are out of view.
WarpField warp_coordinates(const Intrinsics& k, const RigidPose& pose,
                           const ImageD& zdepth, const Mask* validity = nullptr,
                           int threads = 1);

struct SampledImage {
  ImageD values;
  Mask valid;
};

/// Bilinear lookup at `coords`. A sample is invalid if it is out of view or
/// any corner carrying non-zero weight lies outside the image.
SampledImage sample_bilinear(const ImageD& image, const WarpField& coords);

}  // namespace gatedsim
