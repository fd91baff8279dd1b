#include "gatedsim/geometry.hpp"

#include "gatedsim/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace gatedsim {

void Intrinsics::validate() const {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("intrinsics: image size must be positive");
  }
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw std::invalid_argument("intrinsics: singular focal lengths");
  }
  if (!(cx >= 0.0 && cx <= width - 1.0 && cy >= 0.0 && cy <= height - 1.0)) {
    throw std::invalid_argument("intrinsics: principal point outside image");
  }
}

Eigen::Matrix3d Intrinsics::K() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d Intrinsics::K_inv() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

Intrinsics Intrinsics::centered(int width, int height) {
  Intrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = static_cast<double>(width);
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  return k;
}

RigidPose RigidPose::from_matrix(const Eigen::Matrix4d& m) {
  RigidPose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

void RigidPose::validate() const {
  constexpr double kTol = 1e-9;
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("pose: non-finite entries");
  }
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho > kTol) throw std::invalid_argument("pose: R^T R != I");
  if (std::abs(rotation.determinant() - 1.0) > kTol) {
    throw std::invalid_argument("pose: det(R) != +1");
  }
}

bool RigidPose::is_identity() const {
  return rotation == Eigen::Matrix3d::Identity() &&
         translation == Eigen::Vector3d::Zero();
}

Eigen::Matrix4d RigidPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidPose RigidPose::inverse() const {
  RigidPose p;
  p.rotation = rotation.transpose();
  p.translation = -(p.rotation * translation);
  return p;
}

RigidPose compose(const RigidPose& a, const RigidPose& b) {
  RigidPose p;
  p.rotation = a.rotation * b.rotation;
  p.translation = a.rotation * b.translation + a.translation;
  return p;
}

RigidPose relative_pose(const RigidPose& world_from_cam_from,
                        const RigidPose& world_from_cam_to) {
  return compose(world_from_cam_to.inverse(), world_from_cam_from);
}

Eigen::Vector3d pixel_bearing(const Intrinsics& k, double x, double y) {
  return {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
}

Eigen::Vector3d backproject(const Intrinsics& k, double x, double y,
                            double depth) {
  return depth * pixel_bearing(k, x, y);
}

Eigen::Vector3d backproject_range(const Intrinsics& k, double x, double y,
                                  double range) {
  return range * pixel_bearing(k, x, y).normalized();
}

Eigen::Vector2d project(const Intrinsics& k, const Eigen::Vector3d& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

double range_to_zdepth(const Intrinsics& k, double x, double y, double range) {
  return range / pixel_bearing(k, x, y).norm();
}

double zdepth_to_range(const Intrinsics& k, double x, double y, double zdepth) {
  return zdepth * pixel_bearing(k, x, y).norm();
}

namespace {
template <typename Fn>
ImageD map_depth(const Intrinsics& k, const ImageD& in, Fn fn) {
  if (in.width() != k.width || in.height() != k.height) {
    throw DimensionError("depth image does not match intrinsics");
  }
  ImageD out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) out(x, y) = fn(k, x, y, in(x, y));
  }
  return out;
}
}  // namespace

ImageD range_to_zdepth(const Intrinsics& k, const ImageD& range) {
  return map_depth(k, range, [](const Intrinsics& kk, int x, int y, double v) {
    return range_to_zdepth(kk, x, y, v);
  });
}

ImageD zdepth_to_range(const Intrinsics& k, const ImageD& zdepth) {
  return map_depth(k, zdepth, [](const Intrinsics& kk, int x, int y, double v) {
    return zdepth_to_range(kk, x, y, v);
  });
}

WarpField warp_coordinates(const Intrinsics& k, const RigidPose& pose,
                           const ImageD& zdepth, const Mask* validity,
                           int threads) {
  k.validate();
  if (zdepth.width() != k.width || zdepth.height() != k.height) {
    throw DimensionError("warp: depth image does not match intrinsics");
  }
  if (validity != nullptr) require_same_shape(zdepth, *validity, "warp");

  const int w = zdepth.width();
  const int h = zdepth.height();
  WarpField out{ImageD(w, h), ImageD(w, h), Mask(w, h)};
  const bool identity = pose.is_identity();

  parallel_rows(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double d = zdepth(x, y);
      const bool usable = std::isfinite(d) && d > 0.0 &&
                          (validity == nullptr || (*validity)(x, y) != 0);
      out.x(x, y) = x;
      out.y(x, y) = y;
      if (!usable) continue;
      if (identity) {
        out.in_view(x, y) = 1;
        continue;
      }
      const Eigen::Vector3d p = pose.apply(backproject(k, x, y, d));
      if (!(p.z() > 0.0)) continue;
      const Eigen::Vector2d q = project(k, p);
      out.x(x, y) = q.x();
      out.y(x, y) = q.y();
      out.in_view(x, y) = 1;
    }
  });
  return out;
}

SampledImage sample_bilinear(const ImageD& image, const WarpField& coords) {
  require_same_shape(coords.x, coords.y, "sample_bilinear");
  require_same_shape(coords.x, coords.in_view, "sample_bilinear");
  const int w = coords.x.width();
  const int h = coords.x.height();
  SampledImage out{ImageD(w, h), Mask(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!coords.in_view(x, y)) continue;
      const double sx = coords.x(x, y);
      const double sy = coords.y(x, y);
      if (!std::isfinite(sx) || !std::isfinite(sy)) continue;
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const double ax = sx - fx0;
      const double ay = sy - fy0;
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      const int x1 = ax > 0.0 ? x0 + 1 : x0;
      const int y1 = ay > 0.0 ? y0 + 1 : y0;
      if (!image.contains(x0, y0) || !image.contains(x1, y1)) continue;
      const double top = (1.0 - ax) * image(x0, y0) + ax * image(x1, y0);
      const double bottom = (1.0 - ax) * image(x0, y1) + ax * image(x1, y1);
      out.values(x, y) = (1.0 - ay) * top + ay * bottom;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

}  // namespace gatedsim
