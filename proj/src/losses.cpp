#include "gatedsim/losses.hpp"

#include "gatedsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gatedsim {

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0) {
    throw std::invalid_argument("SSIM window must be odd and >= 3");
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw std::invalid_argument("SSIM constants must be positive");
  }
}

namespace {

// Box-window statistics of one interior pixel.
struct Window {
  double mux = 0.0, muy = 0.0;
  double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
  double s = 0.0;
};

Window window_stats(const ImageD& x, const ImageD& y, int cx, int cy,
                    const SsimParams& p) {
  const int r = p.window / 2;
  const double n = static_cast<double>(p.window) * p.window;
  double sx = 0.0, sy = 0.0;
  for (int v = cy - r; v <= cy + r; ++v) {
    for (int u = cx - r; u <= cx + r; ++u) {
      sx += x(u, v);
      sy += y(u, v);
    }
  }
  Window w;
  w.mux = sx / n;
  w.muy = sy / n;
  double vxx = 0.0, vyy = 0.0, vxy = 0.0;
  for (int v = cy - r; v <= cy + r; ++v) {
    for (int u = cx - r; u <= cx + r; ++u) {
      const double dx = x(u, v) - w.mux;
      const double dy = y(u, v) - w.muy;
      vxx += dx * dx;
      vyy += dy * dy;
      vxy += dx * dy;
    }
  }
  vxx /= n;
  vyy /= n;
  vxy /= n;
  w.a1 = 2.0 * w.mux * w.muy + p.c1;
  w.a2 = 2.0 * vxy + p.c2;
  w.b1 = w.mux * w.mux + w.muy * w.muy + p.c1;
  w.b2 = vxx + vyy + p.c2;
  w.s = (w.a1 * w.a2) / (w.b1 * w.b2);
  return w;
}

bool interior(int x, int y, int w, int h, int r) {
  return x >= r && y >= r && x < w - r && y < h - r;
}

bool window_inside(const Mask& m, int cx, int cy, int r) {
  for (int v = cy - r; v <= cy + r; ++v) {
    for (int u = cx - r; u <= cx + r; ++u) {
      if (!m(u, v)) return false;
    }
  }
  return true;
}

ImageD apply_mask(const ImageD& img, const Mask& m) {
  ImageD out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!m[i]) out[i] = 0.0;
  }
  return out;
}

// Validity of the per-pixel loss under the given mask mode.
Mask field_validity(int w, int h, int r, const Mask* mask, MaskMode mode) {
  Mask valid(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!interior(x, y, w, h, r)) continue;
      bool ok = true;
      if (mask != nullptr) {
        ok = mode == MaskMode::kLiteral ? (*mask)(x, y) != 0
                                        : window_inside(*mask, x, y, r);
      }
      valid(x, y) = ok ? 1 : 0;
    }
  }
  return valid;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// d(mean field)/dY for a single image pair, given the field validity.
ImageD field_gradient(const ImageD& x, const ImageD& y, const Mask& valid,
                      const SsimParams& p) {
  const int w = x.width();
  const int h = x.height();
  const int r = p.window / 2;
  const double n = static_cast<double>(p.window) * p.window;
  ImageD grad(w, h, 0.0);
  std::size_t count = count_true(valid);
  if (count == 0) return grad;
  const double inv_count = 1.0 / static_cast<double>(count);
  for (int cy = 0; cy < h; ++cy) {
    for (int cx = 0; cx < w; ++cx) {
      if (!valid(cx, cy)) continue;
      const Window win = window_stats(x, y, cx, cy, p);
      const double scale =
          -kSsimWeight / 2.0 * inv_count * 2.0 / (n * win.b1 * win.b2);
      for (int v = cy - r; v <= cy + r; ++v) {
        for (int u = cx - r; u <= cx + r; ++u) {
          const double ds = win.mux * win.a2 + win.a1 * (x(u, v) - win.mux) -
                            win.s * (win.muy * win.b2 + win.b1 * (y(u, v) - win.muy));
          grad(u, v) += scale * ds;
        }
      }
      grad(cx, cy) += kL1Weight * inv_count * sign(y(cx, cy) - x(cx, cy));
    }
  }
  return grad;
}

double mean_of(const ImageD& values, const Mask& valid, std::size_t* count) {
  std::vector<double> picked;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i]) picked.push_back(values[i]);
  }
  if (count != nullptr) *count = picked.size();
  if (picked.empty()) return 0.0;
  return pairwise_sum(picked) / static_cast<double>(picked.size());
}

}  // namespace

SsimMap ssim(const ImageD& a, const ImageD& b, const SsimParams& params) {
  params.validate();
  require_same_shape(a, b, "ssim");
  const int w = a.width();
  const int h = a.height();
  const int r = params.window / 2;
  SsimMap out{ImageD(w, h, 0.0), Mask(w, h)};
  for (int y = r; y < h - r; ++y) {
    for (int x = r; x < w - r; ++x) {
      out.values(x, y) = window_stats(a, b, x, y, params).s;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

double constant_image_ssim(double mu1, double mu2, const SsimParams& params) {
  return ((2.0 * mu1 * mu2 + params.c1) * params.c2) /
         ((mu1 * mu1 + mu2 * mu2 + params.c1) * params.c2);
}

LossField photometric_field(const ImageD& z, const ImageD& z_hat,
                            const Mask* mask, const SsimParams& params,
                            MaskMode mode) {
  params.validate();
  require_same_shape(z, z_hat, "photometric loss");
  if (mask != nullptr) require_same_shape(z, *mask, "photometric loss mask");
  const int w = z.width();
  const int h = z.height();
  const int r = params.window / 2;

  const bool literal = mask != nullptr && mode == MaskMode::kLiteral;
  const ImageD x = literal ? apply_mask(z, *mask) : z;
  const ImageD y = literal ? apply_mask(z_hat, *mask) : z_hat;

  LossField field{ImageD(w, h, 0.0), field_validity(w, h, r, mask, mode)};
  for (int cy = 0; cy < h; ++cy) {
    for (int cx = 0; cx < w; ++cx) {
      if (!field.valid(cx, cy)) continue;
      const double s = window_stats(x, y, cx, cy, params).s;
      field.value(cx, cy) = photometric_pixel(s, std::abs(x(cx, cy) - y(cx, cy)));
    }
  }
  return field;
}

double field_mean(const LossField& field, std::size_t* count) {
  return mean_of(field.value, field.valid, count);
}

LossReport photometric_loss(const ImageD& z, const ImageD& z_hat,
                            const Mask* mask, const SsimParams& params,
                            MaskMode mode) {
  const LossField field = photometric_field(z, z_hat, mask, params, mode);
  LossReport rep;
  rep.total = field_mean(field, &rep.valid_pixel_count);
  if (rep.valid_pixel_count == 0) rep.diagnostic = "empty mask";
  return rep;
}

std::array<ImageD, kNumSlices> reconstruct_slices(const SceneEstimate& est,
                                                  const ProfileSet& profiles,
                                                  ProfileMode mode) {
  require_same_shape(est.depth, est.albedo, "estimate");
  require_same_shape(est.depth, est.ambient, "estimate");
  std::array<ImageD, kNumSlices> out;
  for (int i = 0; i < kNumSlices; ++i) {
    out[i] = ImageD(est.depth.width(), est.depth.height());
    for (std::size_t p = 0; p < est.depth.size(); ++p) {
      out[i][p] = est.albedo[p] * profiles[i].eval(est.depth[p], mode) +
                  est.ambient[p];
    }
  }
  return out;
}

LossReport cyclic_loss(const GatedFrame& frame, const SceneEstimate& est,
                       const ProfileSet& profiles, const Mask* mask_b,
                       const CyclicLossOptions& options) {
  frame.validate();
  require_same_shape(frame.passive, est.depth, "cyclic loss");
  const auto z_hat = reconstruct_slices(est, profiles, options.profile_mode);
  LossReport rep;
  for (int i = 0; i < kNumSlices; ++i) {
    const LossField f = photometric_field(frame.slices[i], z_hat[i], mask_b,
                                          options.ssim, options.mask_mode);
    rep.per_slice[i] = field_mean(f, &rep.valid_pixel_count);
  }
  const LossField amb = photometric_field(est.ambient, frame.passive, nullptr,
                                          options.ssim, options.mask_mode);
  rep.ambient_term = field_mean(amb);
  rep.total = rep.per_slice[0] + rep.per_slice[1] + rep.per_slice[2] +
              rep.ambient_term;
  if (rep.valid_pixel_count == 0) rep.diagnostic = "mask b admits no pixel";
  if (options.with_gradient) {
    rep.gradient = cyclic_loss_depth_gradient(frame, est, profiles, mask_b, options);
  }
  return rep;
}

ImageD cyclic_loss_depth_gradient(const GatedFrame& frame,
                                  const SceneEstimate& est,
                                  const ProfileSet& profiles, const Mask* mask_b,
                                  const CyclicLossOptions& options) {
  frame.validate();
  options.ssim.validate();
  require_same_shape(frame.passive, est.depth, "cyclic gradient");
  if (mask_b != nullptr) require_same_shape(frame.passive, *mask_b, "cyclic gradient");
  const int w = frame.width();
  const int h = frame.height();
  const int r = options.ssim.window / 2;
  const bool literal = mask_b != nullptr && options.mask_mode == MaskMode::kLiteral;
  const Mask valid = field_validity(w, h, r, mask_b, options.mask_mode);
  const auto z_hat = reconstruct_slices(est, profiles, options.profile_mode);

  ImageD grad(w, h, 0.0);
  for (int i = 0; i < kNumSlices; ++i) {
    const ImageD x = literal ? apply_mask(frame.slices[i], *mask_b) : frame.slices[i];
    const ImageD y = literal ? apply_mask(z_hat[i], *mask_b) : z_hat[i];
    const ImageD gy = field_gradient(x, y, valid, options.ssim);
    for (std::size_t p = 0; p < grad.size(); ++p) {
      if (literal && !(*mask_b)[p]) continue;
      grad[p] += gy[p] * est.albedo[p] *
                 profiles[i].derivative(est.depth[p], options.profile_mode);
    }
  }
  return grad;
}

ImageD finite_difference_gradient(
    const std::function<double(const ImageD&)>& loss, const ImageD& depth,
    double h, const Mask* pixels) {
  if (pixels != nullptr) require_same_shape(depth, *pixels, "finite differences");
  ImageD grad(depth.width(), depth.height(), 0.0);
  ImageD probe = depth;
  for (std::size_t p = 0; p < depth.size(); ++p) {
    if (pixels != nullptr && !(*pixels)[p]) continue;
    probe[p] = depth[p] + h;
    const double up = loss(probe);
    probe[p] = depth[p] - h;
    const double down = loss(probe);
    probe[p] = depth[p];
    grad[p] = (up - down) / (2.0 * h);
  }
  return grad;
}

TemporalLossResult temporal_loss(const GatedFrame& frame_t,
                                 const std::array<TemporalNeighbor, 2>& neighbors,
                                 const ImageD& range, const Mask* mask_v,
                                 const Intrinsics& intrinsics,
                                 const SsimParams& params, MaskMode mode) {
  frame_t.validate();
  require_same_shape(frame_t.passive, range, "temporal loss");
  if (mask_v != nullptr) require_same_shape(range, *mask_v, "temporal loss");
  const int w = frame_t.width();
  const int h = frame_t.height();
  const ImageD zdepth = range_to_zdepth(intrinsics, range);

  TemporalLossResult res;
  std::array<std::array<LossField, kNumSlices>, 2> slice_fields;
  for (int n = 0; n < 2; ++n) {
    const auto& nb = neighbors[n];
    if (nb.frame == nullptr) throw std::invalid_argument("temporal loss: missing neighbour");
    nb.frame->validate();
    require_same_shape(frame_t.passive, nb.frame->passive, "temporal neighbour");
    const WarpField coords =
        warp_coordinates(intrinsics, nb.target_to_neighbor, zdepth, mask_v);
    Mask pair_mask(w, h);
    std::array<ImageD, kNumSlices> sampled;
    for (int i = 0; i < kNumSlices; ++i) {
      auto s = sample_bilinear(nb.frame->slices[i], coords);
      sampled[i] = std::move(s.values);
      if (i == 0) pair_mask = std::move(s.valid);
    }
    if (mask_v != nullptr) {
      for (std::size_t p = 0; p < pair_mask.size(); ++p) {
        pair_mask[p] = (pair_mask[p] && (*mask_v)[p]) ? 1 : 0;
      }
    }
    LossField pair{ImageD(w, h, 0.0), Mask(w, h)};
    for (int i = 0; i < kNumSlices; ++i) {
      slice_fields[n][i] =
          photometric_field(frame_t.slices[i], sampled[i], &pair_mask, params, mode);
      for (std::size_t p = 0; p < pair.value.size(); ++p) {
        pair.value[p] += slice_fields[n][i].value[p];
      }
    }
    pair.valid = slice_fields[n][0].valid;
    res.pair_fields[n] = std::move(pair);
  }

  res.per_pixel = ImageD(w, h, 0.0);
  res.valid = Mask(w, h);
  std::array<std::vector<double>, kNumSlices> chosen;
  std::vector<double> totals;
  for (std::size_t p = 0; p < res.per_pixel.size(); ++p) {
    const bool v0 = res.pair_fields[0].valid[p] != 0;
    const bool v1 = res.pair_fields[1].valid[p] != 0;
    if (!v0 && !v1) continue;
    int pick = v0 ? 0 : 1;
    if (v0 && v1 && res.pair_fields[1].value[p] < res.pair_fields[0].value[p]) {
      pick = 1;
    }
    res.per_pixel[p] = res.pair_fields[pick].value[p];
    res.valid[p] = 1;
    totals.push_back(res.per_pixel[p]);
    for (int i = 0; i < kNumSlices; ++i) {
      chosen[i].push_back(slice_fields[pick][i].value[p]);
    }
  }
  auto& rep = res.report;
  rep.valid_pixel_count = totals.size();
  if (totals.empty()) {
    rep.diagnostic = "no pixel has a valid reprojection under mask v";
    return res;
  }
  const double n = static_cast<double>(totals.size());
  for (int i = 0; i < kNumSlices; ++i) rep.per_slice[i] = pairwise_sum(chosen[i]) / n;
  rep.total = pairwise_sum(totals) / n;
  return res;
}

}  // namespace gatedsim
