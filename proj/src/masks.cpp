#include "gatedsim/masks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gatedsim {

void MaskThresholds::validate() const {
  if (!(theta > 0.0 && theta < gamma && gamma <= 1.0)) {
    throw std::invalid_argument("mask thresholds: need 0 < theta < gamma <= 1");
  }
  if (!(c_ratio > 0.0 && c_ratio <= 1.0)) {
    throw std::invalid_argument("mask thresholds: need 0 < c <= 1");
  }
  if (std::abs(plane_normal.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("mask thresholds: plane normal not unit length");
  }
  if (!(plane_tolerance >= 0.0)) {
    throw std::invalid_argument("mask thresholds: negative plane tolerance");
  }
}

namespace {
template <typename Pred>
Mask per_pixel(const GatedFrame& frame, Pred pred) {
  frame.validate();
  Mask out(frame.width(), frame.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = pred(frame.slices[0][i], frame.slices[1][i], frame.slices[2][i])
                 ? 1
                 : 0;
  }
  return out;
}
}  // namespace

Mask variance_mask(const GatedFrame& frame, double theta) {
  return per_pixel(frame, [theta](double a, double b, double c) {
    return std::max({a, b, c}) - std::min({a, b, c}) > theta;
  });
}

Mask saturation_mask(const GatedFrame& frame, double gamma) {
  return per_pixel(frame, [gamma](double a, double b, double c) {
    return std::max({a, b, c}) < gamma;
  });
}

Mask multipath_mask(const ImageD& range, const Mask* validity,
                    const Intrinsics& intrinsics,
                    const MaskThresholds& thresholds) {
  intrinsics.validate();
  thresholds.validate();
  if (range.width() != intrinsics.width || range.height() != intrinsics.height) {
    throw DimensionError("multipath_mask: depth does not match intrinsics");
  }
  if (validity != nullptr) require_same_shape(range, *validity, "multipath_mask");
  Mask out(range.width(), range.height());
  const double limit = thresholds.plane_height - thresholds.plane_tolerance;
  for (int y = 0; y < range.height(); ++y) {
    for (int x = 0; x < range.width(); ++x) {
      const double r = range(x, y);
      if (validity != nullptr && !(*validity)(x, y)) continue;
      if (!std::isfinite(r) || !(r > 0.0)) continue;
      const Eigen::Vector3d p = thresholds.literal_backprojection
                                    ? backproject(intrinsics, x, y, r)
                                    : backproject_range(intrinsics, x, y, r);
      out(x, y) = p.dot(thresholds.plane_normal) < limit ? 1 : 0;
    }
  }
  return out;
}

CombinedMask combine_b(const Mask& D, const Mask& M, const Mask& E) {
  require_same_shape(D, M, "combine_b");
  require_same_shape(D, E, "combine_b");
  CombinedMask out{Mask(D.width(), D.height()), Mask(D.width(), D.height())};
  for (std::size_t i = 0; i < D.size(); ++i) {
    out.b_prime[i] = (D[i] && M[i]) ? 1 : 0;
    out.b[i] = (out.b_prime[i] && !E[i]) ? 1 : 0;
  }
  return out;
}

std::optional<double> profile_crossover(const RangeIntensityProfile& a,
                                        const RangeIntensityProfile& b,
                                        double c, ProfileMode mode) {
  const auto va = a.visible_range();
  const auto vb = b.visible_range();
  const double lo = std::max(va.lo, vb.lo);
  const double hi = std::min(va.hi, vb.hi);
  if (!(lo < hi)) return std::nullopt;
  auto f = [&](double r) { return a.eval(r, mode) - c * b.eval(r, mode); };

  constexpr double kScanStep = 0.01;
  double left = lo + kScanStep;
  double f_left = f(left);
  for (double right = left + kScanStep; right < hi; right += kScanStep) {
    const double f_right = f(right);
    if (f_left > 0.0 && f_right <= 0.0) {
      double l = left;
      double r = right;
      for (int it = 0; it < 200 && r - l > 1e-13 * std::max(1.0, r); ++it) {
        const double mid = 0.5 * (l + r);
        if (f(mid) > 0.0) {
          l = mid;
        } else {
          r = mid;
        }
      }
      return 0.5 * (l + r);
    }
    left = right;
    f_left = f_right;
  }
  return std::nullopt;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

InfinityMasks infinity_masks(const GatedFrame& frame, const ImageD& depth,
                             const Mask* validity, const ProfileSet& profiles,
                             const MaskThresholds& thresholds) {
  frame.validate();
  thresholds.validate();
  require_same_shape(frame.passive, depth, "infinity_masks");
  if (validity != nullptr) require_same_shape(depth, *validity, "infinity_masks");

  const double c = thresholds.c_ratio;
  const int w = frame.width();
  const int h = frame.height();
  InfinityMasks out;
  out.S1 = Mask(w, h);
  out.S2 = Mask(w, h);
  out.m = Mask(w, h);
  out.v = Mask(w, h);

  const auto s0 = profile_crossover(profiles[0], profiles[2], c);
  const auto s1 = profile_crossover(profiles[1], profiles[2], c);
  out.s0 = s0.value_or(std::numeric_limits<double>::quiet_NaN());
  out.s1 = s1.value_or(std::numeric_limits<double>::quiet_NaN());

  std::vector<double> close_depths;
  for (std::size_t i = 0; i < out.m.size(); ++i) {
    const double z2 = frame.slices[2][i];
    out.S1[i] = frame.slices[0][i] >= c * z2 ? 1 : 0;
    out.S2[i] = frame.slices[1][i] >= c * z2 ? 1 : 0;
    out.m[i] = (out.S1[i] || out.S2[i]) ? 1 : 0;
    const bool usable = validity == nullptr || (*validity)[i];
    if (out.m[i] && usable && std::isfinite(depth[i])) {
      close_depths.push_back(depth[i]);
    }
  }

  if (close_depths.empty()) {
    out.r_bar = std::numeric_limits<double>::quiet_NaN();
    out.diagnostic = "mask m selects no pixel with usable depth; v is empty";
    return out;
  }
  out.r_bar = median(std::move(close_depths));
  const double limit = 2.0 * out.r_bar;
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const bool usable = validity == nullptr || (*validity)[i];
    out.v[i] = (out.m[i] && usable && depth[i] < limit) ? 1 : 0;
  }
  return out;
}

MaskStack build_mask_stack(const GatedFrame& frame, const ImageD& depth,
                           const Mask* validity, const Intrinsics& intrinsics,
                           const ProfileSet& profiles,
                           const MaskThresholds& thresholds) {
  thresholds.validate();
  MaskStack s;
  s.thresholds = thresholds;
  s.D = variance_mask(frame, thresholds.theta);
  s.M = saturation_mask(frame, thresholds.gamma);
  s.E = multipath_mask(depth, validity, intrinsics, thresholds);
  auto combined = combine_b(s.D, s.M, s.E);
  s.b_prime = std::move(combined.b_prime);
  s.b = std::move(combined.b);
  auto inf = infinity_masks(frame, depth, validity, profiles, thresholds);
  s.S1 = std::move(inf.S1);
  s.S2 = std::move(inf.S2);
  s.m = std::move(inf.m);
  s.v = std::move(inf.v);
  s.s0 = inf.s0;
  s.s1 = inf.s1;
  s.r_bar = inf.r_bar;
  s.diagnostic = std::move(inf.diagnostic);
  return s;
}

}  // namespace gatedsim
