#include "gatedsim/losses.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gatedsim;

namespace {

ImageD random_image(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ImageD img(w, h);
  for (auto& v : img.pixels()) v = u(rng);
  return img;
}

// Textbook SSIM of one window, written out independently.
double window_ssim(const ImageD& a, const ImageD& b, int cx, int cy, int r,
                   double c1, double c2) {
  double n = 0, sa = 0, sb = 0;
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x) sa += a(x, y), sb += b(x, y), ++n;
  const double ma = sa / n, mb = sb / n;
  double va = 0, vb = 0, cov = 0;
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x) {
      va += (a(x, y) - ma) * (a(x, y) - ma);
      vb += (b(x, y) - mb) * (b(x, y) - mb);
      cov += (a(x, y) - ma) * (b(x, y) - mb);
    }
  va /= n, vb /= n, cov /= n;
  return (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

GatedFrame random_scene_frame(std::mt19937_64& rng, int w, int h, SceneEstimate& truth,
                              const ProfileSet& profiles) {
  truth.depth = random_image(rng, w, h, 20.0, 110.0);
  truth.albedo = random_image(rng, w, h, 0.2, 0.8);
  truth.ambient = random_image(rng, w, h, 0.0, 0.1);
  SceneModel s = SceneModel::uniform(w, h, 0, 1, 0);
  s.depth = truth.depth;
  s.albedo = truth.albedo;
  s.ambient = truth.ambient;
  return render_noiseless(s, profiles);
}

}  // namespace

TEST(Ssim, IdentitySymmetryAndReference) {
  std::mt19937_64 rng(1);
  const auto a = random_image(rng, 20, 15), b = random_image(rng, 20, 15);
  const SsimParams p;
  const auto same = ssim(a, a, p);
  const auto ab = ssim(a, b, p), ba = ssim(b, a, p);
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool interior = x >= 3 && y >= 3 && x < 17 && y < 12;
      EXPECT_EQ(same.valid(x, y) != 0, interior);
      if (!interior) continue;
      EXPECT_NEAR(same.values(x, y), 1.0, 1e-12);
      EXPECT_NEAR(ab.values(x, y), ba.values(x, y), 1e-12);
      EXPECT_NEAR(ab.values(x, y), window_ssim(a, b, x, y, 3, p.c1, p.c2), 1e-12);
      EXPECT_GE(ab.values(x, y), -1.0);
      EXPECT_LE(ab.values(x, y), 1.0);
    }
}

TEST(Ssim, ConstantImagesClosedForm) {
  const SsimParams p;
  const auto m = ssim(ImageD(9, 9, 0.3), ImageD(9, 9, 0.4), p);
  const double expect = (2 * 0.3 * 0.4 + p.c1) * p.c2 / ((0.09 + 0.16 + p.c1) * p.c2);
  EXPECT_NEAR(m.values(4, 4), expect, 1e-12);
  EXPECT_NEAR(constant_image_ssim(0.3, 0.4, p), expect, 1e-15);
}

TEST(Ssim, RejectsBadParameters) {
  SsimParams p;
  p.window = 4;
  EXPECT_THROW(ssim(ImageD(9, 9), ImageD(9, 9), p), std::invalid_argument);
  p = SsimParams{};
  p.c1 = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Photometric, CalibrationPoints) {
  std::mt19937_64 rng(2);
  const auto a = random_image(rng, 16, 16);
  EXPECT_EQ(photometric_loss(a, a, nullptr).total, 0.0);

  const auto r = photometric_loss(ImageD(16, 16, 0.5), ImageD(16, 16, 0.6), nullptr);
  const double s = constant_image_ssim(0.5, 0.6);
  EXPECT_NEAR(r.total, 0.85 * (1 - s) / 2 + 0.15 * 0.1, 1e-9);
  EXPECT_EQ(r.valid_pixel_count, 10u * 10u);
  EXPECT_NEAR(photometric_pixel(1.0, 0.2), 0.03, 1e-15);
}

TEST(Photometric, EmptyMaskDiagnostic) {
  const Mask none(12, 12, 0);
  const auto r = photometric_loss(ImageD(12, 12, 0.1), ImageD(12, 12, 0.9), &none);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.valid_pixel_count, 0u);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(Photometric, MaskModes) {
  std::mt19937_64 rng(3);
  const auto a = random_image(rng, 20, 20), b = random_image(rng, 20, 20);
  Mask m(20, 20, 1);
  m(10, 10) = 0;
  const auto restricted = photometric_field(a, b, &m, {}, MaskMode::kRestricted);
  const auto literal = photometric_field(a, b, &m, {}, MaskMode::kLiteral);
  // Restricted drops every window touching (10, 10).
  for (int y = 3; y < 17; ++y)
    for (int x = 3; x < 17; ++x) {
      const bool touches = std::abs(x - 10) <= 3 && std::abs(y - 10) <= 3;
      EXPECT_EQ(restricted.valid(x, y) != 0, !touches);
      EXPECT_EQ(literal.valid(x, y) != 0, !(x == 10 && y == 10));
    }
  // Literal multiplies by the mask before the statistics.
  ImageD am = a, bm = b;
  am(10, 10) = 0.0;
  bm(10, 10) = 0.0;
  const SsimParams p;
  const double s = window_ssim(am, bm, 11, 10, 3, p.c1, p.c2);
  EXPECT_NEAR(literal.value(11, 10), photometric_pixel(s, std::abs(am(11, 10) - bm(11, 10))), 1e-12);
}

TEST(Photometric, SmallerMaskFieldIsSubsetOfLarger) {
  std::mt19937_64 rng(4);
  const auto a = random_image(rng, 24, 24), b = random_image(rng, 24, 24);
  Mask big(24, 24, 1), small(24, 24, 1);
  for (int x = 0; x < 24; ++x) small(x, 12) = 0;
  for (auto mode : {MaskMode::kRestricted}) {
    const auto fb = photometric_field(a, b, &big, {}, mode);
    const auto fs = photometric_field(a, b, &small, {}, mode);
    for (std::size_t p = 0; p < fs.value.size(); ++p) {
      if (!fs.valid[p]) continue;
      EXPECT_TRUE(fb.valid[p]);
      EXPECT_EQ(fs.value[p], fb.value[p]);
    }
  }
}

TEST(Cyclic, PerfectEstimateAndMaskBehaviour) {
  std::mt19937_64 rng(5);
  const auto profiles = default_profiles();
  SceneEstimate truth;
  const auto f = random_scene_frame(rng, 20, 20, truth, profiles);
  const auto r = cyclic_loss(f, truth, profiles, nullptr);
  EXPECT_NEAR(r.total, 0.0, 1e-12);

  const Mask none(20, 20, 0);
  SceneEstimate off = truth;
  for (auto& v : off.ambient.pixels()) v += 0.05;
  const auto masked = cyclic_loss(f, off, profiles, &none);
  EXPECT_EQ(masked.per_slice[0] + masked.per_slice[1] + masked.per_slice[2], 0.0);
  EXPECT_GT(masked.ambient_term, 0.0);
  EXPECT_DOUBLE_EQ(masked.total, masked.ambient_term);
}

TEST(Cyclic, DepthPerturbationOnRampIncreasesLoss) {
  const auto profiles = default_profiles();
  SceneEstimate truth{ImageD(16, 16, 30.0), ImageD(16, 16, 0.5), ImageD(16, 16, 0.05)};
  SceneModel s = SceneModel::uniform(16, 16, 0.5, 30.0, 0.05);
  const auto f = render_noiseless(s, profiles);
  SceneEstimate moved = truth;
  for (auto& v : moved.depth.pixels()) v += 5.0;
  EXPECT_GT(cyclic_loss(f, moved, profiles, nullptr).total,
            cyclic_loss(f, truth, profiles, nullptr).total);
}

TEST(Gradient, ZeroOutsideAllGates) {
  const auto profiles = default_profiles();
  SceneEstimate est{ImageD(12, 12, 300.0), ImageD(12, 12, 0.5), ImageD(12, 12, 0.1)};
  const auto f = render_noiseless(SceneModel::uniform(12, 12, 0.5, 40.0, 0.1), profiles);
  const auto g = cyclic_loss_depth_gradient(f, est, profiles, nullptr);
  for (double v : g.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, SinglePixelL1Term) {
  // A 7x7 image has one interior pixel. Huge SSIM constants pin SSIM to 1 and
  // its derivative to ~0, leaving the L1 chain rule.
  const auto profiles = default_profiles();
  const double r = 40.0, a = 0.5;
  SceneEstimate est{ImageD(7, 7, r), ImageD(7, 7, a), ImageD(7, 7, 0.0)};
  GatedFrame f;
  for (auto& sl : f.slices) sl = ImageD(7, 7, 0.2);
  f.passive = ImageD(7, 7, 0.0);
  CyclicLossOptions opt;
  opt.ssim.c1 = opt.ssim.c2 = 1e12;
  const auto g = cyclic_loss_depth_gradient(f, est, profiles, nullptr, opt);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double zhat = a * profiles[i].eval(r, ProfileMode::kChebyshev);
    const double sgn = (zhat > 0.2) - (zhat < 0.2);
    expected += sgn * a * profiles[i].derivative(r, ProfileMode::kChebyshev) * 0.15;
  }
  ASSERT_NE(expected, 0.0);
  EXPECT_NEAR(g(3, 3), expected, 1e-9);
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto profiles = default_profiles();
  SceneEstimate truth;
  const auto f = random_scene_frame(rng, 18, 18, truth, profiles);
  SceneEstimate est = truth;
  std::normal_distribution<double> n(0.0, 3.0);
  for (auto& v : est.depth.pixels()) v += n(rng);
  Mask b(18, 18, 1);
  for (auto mode : {MaskMode::kRestricted, MaskMode::kLiteral}) {
    CyclicLossOptions opt;
    opt.mask_mode = mode;
    const auto g = cyclic_loss_depth_gradient(f, est, profiles, &b, opt);
    const auto fd = finite_difference_gradient(
        [&](const ImageD& d) {
          SceneEstimate e = est;
          e.depth = d;
          return cyclic_loss(f, e, profiles, &b, opt).total;
        },
        est.depth, 1e-3);
    int checked = 0, good = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (std::abs(g[p]) <= 1e-8) continue;
      ++checked;
      good += std::abs(g[p] - fd[p]) <= 1e-4 * std::abs(g[p]);
    }
    ASSERT_GT(checked, 0);
    EXPECT_GE(good, 0.99 * checked);
  }
}

TEST(Temporal, StaticSceneIsZeroAndEmptyMaskDiagnostic) {
  const auto profiles = default_profiles();
  const int w = 24, h = 16;
  SceneParams sp;
  sp.wall_distance = 30.0;
  sp.ambient_gradient = 0.01;
  const auto scene = make_test_scene(SceneKind::kFlatWall, w, h, sp);
  const auto f = render_noiseless(scene, profiles);
  const auto k = Intrinsics::centered(w, h);
  std::array<TemporalNeighbor, 2> nb{TemporalNeighbor{&f, RigidPose::identity()},
                                     TemporalNeighbor{&f, RigidPose::identity()}};
  const auto r = temporal_loss(f, nb, scene.depth, nullptr, k);
  EXPECT_NEAR(r.report.total, 0.0, 1e-15);
  const Mask none(w, h, 0);
  const auto e = temporal_loss(f, nb, scene.depth, &none, k);
  EXPECT_EQ(e.report.total, 0.0);
  EXPECT_EQ(e.report.valid_pixel_count, 0u);
  EXPECT_FALSE(e.report.diagnostic.empty());
}

TEST(Temporal, MinSelectionAgainstTwoPassOracle) {
  const auto profiles = default_profiles();
  const int w = 32, h = 24;
  std::mt19937_64 rng(7);
  SceneParams sp;
  sp.wall_distance = 40.0;
  sp.ambient_gradient = 0.01;
  const auto scene = make_test_scene(SceneKind::kFlatWall, w, h, sp);
  const auto clean = render_noiseless(scene, profiles);
  GatedFrame corrupted = clean;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : corrupted.slices)
    for (auto& v : s.pixels()) v = u(rng);
  const auto k = Intrinsics::centered(w, h);
  std::array<TemporalNeighbor, 2> nb{TemporalNeighbor{&corrupted, RigidPose::identity()},
                                     TemporalNeighbor{&clean, RigidPose::identity()}};
  const auto r = temporal_loss(clean, nb, scene.depth, nullptr, k);

  // Oracle: each pair evaluated on its own.
  for (int n = 0; n < 2; ++n) {
    const GatedFrame& src = n == 0 ? corrupted : clean;
    ImageD pair(w, h, 0.0);
    Mask valid;
    for (int i = 0; i < 3; ++i) {
      const auto fld = photometric_field(clean.slices[i], src.slices[i], nullptr);
      for (std::size_t p = 0; p < pair.size(); ++p) pair[p] += fld.value[p];
      valid = fld.valid;
    }
    for (std::size_t p = 0; p < pair.size(); ++p) {
      if (!r.valid[p]) continue;
      EXPECT_LE(r.per_pixel[p], pair[p] + 1e-15);
    }
    if (n == 1) {
      std::size_t cnt = 0;
      double sum = 0.0;
      for (std::size_t p = 0; p < pair.size(); ++p)
        if (valid[p]) sum += pair[p], ++cnt;
      EXPECT_NEAR(r.report.total, sum / cnt, 1e-15);
    }
  }
}

TEST(Temporal, MinIsPixelwiseBelowEachPair) {
  const auto profiles = default_profiles();
  const int w = 40, h = 30;
  SceneParams s0, s1, s2;
  s0.wall_distance = s1.wall_distance = s2.wall_distance = 35.0;
  s0.ambient_gradient = s1.ambient_gradient = s2.ambient_gradient = 0.005;
  s0.albedo_spread = 0.0;
  s1.camera_to_world.translation = Eigen::Vector3d(0, 0, -1.0);
  s2.camera_to_world.translation = Eigen::Vector3d(0.2, 0, 1.0);
  const auto a = make_test_scene(SceneKind::kFlatWall, w, h, s0);
  const auto f0 = render_noiseless(a, profiles);
  const auto f1 = render_noiseless(make_test_scene(SceneKind::kFlatWall, w, h, s1), profiles);
  const auto f2 = render_noiseless(make_test_scene(SceneKind::kFlatWall, w, h, s2), profiles);
  const auto k = Intrinsics::centered(w, h);
  std::array<TemporalNeighbor, 2> nb{
      TemporalNeighbor{&f1, relative_pose(s0.camera_to_world, s1.camera_to_world)},
      TemporalNeighbor{&f2, relative_pose(s0.camera_to_world, s2.camera_to_world)}};
  const auto r = temporal_loss(f0, nb, a.depth, nullptr, k);
  for (std::size_t p = 0; p < r.per_pixel.size(); ++p) {
    if (!r.valid[p]) continue;
    for (int n = 0; n < 2; ++n) {
      if (r.pair_fields[n].valid[p]) EXPECT_LE(r.per_pixel[p], r.pair_fields[n].value[p]);
    }
  }
  EXPECT_GT(r.report.valid_pixel_count, 0u);

  std::array<TemporalNeighbor, 2> same{TemporalNeighbor{&f0, RigidPose::identity()}, nb[1]};
  const auto z = temporal_loss(f0, same, a.depth, nullptr, k);
  EXPECT_LT(z.report.total, 1e-12);
}
