#include "gatedsim/eval.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace gatedsim;

namespace {

struct Setup {
  ImageD pred;
  Mask valid;
  std::vector<GroundTruthPoint> gt;
};

Setup random_setup(std::uint64_t seed, int n, int w = 200, int h = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  std::uniform_real_distribution<double> ud(0.0, 100.0), up(1.0, 120.0), uv(0.0, 1.0);
  Setup s{ImageD(w, h), Mask(w, h), {}};
  for (std::size_t p = 0; p < s.pred.size(); ++p) {
    s.pred[p] = up(rng);
    s.valid[p] = uv(rng) < 0.8;
  }
  for (int i = 0; i < n; ++i) s.gt.push_back({ux(rng), uy(rng), ud(rng)});
  return s;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  ImageD pred(4, 1);
  std::vector<GroundTruthPoint> gt;
  for (int x = 0; x < 4; ++x) {
    pred(x, 0) = 10.0 + 10 * x;
    gt.push_back({x, 0, pred(x, 0)});
  }
  const auto m = compute_metrics(pred, Mask(4, 1, 1), gt);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.ard, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
  EXPECT_EQ(m.completeness, 1.0);
}

TEST(Metrics, ConstantOffset) {
  ImageD pred(10, 1, 42.0);
  std::vector<GroundTruthPoint> gt;
  for (int x = 0; x < 10; ++x) gt.push_back({x, 0, 40.0});
  const auto m = compute_metrics(pred, Mask(10, 1, 1), gt);
  EXPECT_NEAR(m.rmse, 2.0, 1e-12);
  EXPECT_NEAR(m.mae, 2.0, 1e-12);
  EXPECT_NEAR(m.ard, 0.05, 1e-12);
  EXPECT_EQ(m.delta1, 1.0);
}

TEST(Metrics, RangeFilterIsInclusive) {
  ImageD pred(5, 1, 50.0);
  std::vector<GroundTruthPoint> gt{{0, 0, 2.999}, {1, 0, 3.0}, {2, 0, 80.0}, {3, 0, 80.001}, {9, 0, 50.0}};
  const auto m = compute_metrics(pred, Mask(5, 1, 1), gt);
  EXPECT_EQ(m.n_in_range, 2u);
  EXPECT_EQ(m.n_points, 2u);
  EXPECT_EQ(m.range.lo, 3.0);
  EXPECT_EQ(m.range.hi, 80.0);
}

TEST(Metrics, EmptyIsFlaggedNotNan) {
  ImageD pred(2, 1, 10.0);
  const auto m = compute_metrics(pred, Mask(2, 1, 0), std::vector<GroundTruthPoint>{{0, 0, 10.0}});
  EXPECT_TRUE(m.empty);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.completeness, 0.0);
  EXPECT_EQ(m.n_in_range, 1u);
}

TEST(Metrics, MatchesNaiveReferenceLoop) {
  const auto s = random_setup(42, 100000);
  const auto m = compute_metrics(s.pred, s.valid, s.gt);
  const auto o = oracle::naive_metrics(s.pred, s.valid, s.gt);
  EXPECT_EQ(m.n_points, o.n);
  EXPECT_NEAR(m.rmse, o.rmse, 1e-12);
  EXPECT_NEAR(m.mae, o.mae, 1e-12);
  EXPECT_NEAR(m.ard, o.ard, 1e-12);
  EXPECT_NEAR(m.delta1, o.d1, 1e-12);
  EXPECT_NEAR(m.delta2, o.d2, 1e-12);
  EXPECT_NEAR(m.delta3, o.d3, 1e-12);
  EXPECT_NEAR(m.completeness, o.completeness, 1e-12);
}

TEST(Metrics, Invariants) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto s = random_setup(seed, 2000);
    const auto m = compute_metrics(s.pred, s.valid, s.gt);
    EXPECT_LE(m.delta1, m.delta2);
    EXPECT_LE(m.delta2, m.delta3);
    EXPECT_GE(m.rmse, m.mae);
    EXPECT_GE(m.mae, 0.0);
    EXPECT_GE(m.completeness, 0.0);
    EXPECT_LE(m.completeness, 1.0);
    std::shuffle(s.gt.begin(), s.gt.end(), std::mt19937_64(seed));
    const auto shuffled = compute_metrics(s.pred, s.valid, s.gt);
    EXPECT_NEAR(shuffled.rmse, m.rmse, 1e-12);
    EXPECT_NEAR(shuffled.ard, m.ard, 1e-12);
    // Invalidate more predictions: completeness cannot grow.
    Mask fewer = s.valid;
    for (std::size_t p = 0; p < fewer.size(); p += 3) fewer[p] = 0;
    EXPECT_LE(compute_metrics(s.pred, fewer, s.gt).completeness, m.completeness);
  }
}

TEST(Binned, DefaultEdges) {
  const auto e = default_bin_edges();
  ASSERT_EQ(e.size(), 12u);
  EXPECT_EQ(e.front(), 3.0);
  EXPECT_EQ(e.back(), 80.0);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_EQ(e[i] - e[i - 1], 7.0);
}

TEST(Binned, SingleBinEqualsComputeMetrics) {
  const auto s = random_setup(7, 20000);
  const auto b = binned_metrics(s.pred, s.valid, s.gt, {3.0, 80.0});
  const auto m = compute_metrics(s.pred, s.valid, s.gt);
  ASSERT_EQ(b.per_bin.size(), 1u);
  EXPECT_EQ(b.aggregate.rmse, m.rmse);
  EXPECT_EQ(b.aggregate.mae, m.mae);
  EXPECT_EQ(b.aggregate.ard, m.ard);
  EXPECT_EQ(b.aggregate.delta1, m.delta1);
  EXPECT_EQ(b.aggregate.completeness, m.completeness);
}

TEST(Binned, HalfOpenBinsAndEqualWeighting) {
  // Bin [3,10): 1 point with error 1; bin [10,17): 9 points with error 3.
  ImageD pred(10, 1);
  std::vector<GroundTruthPoint> gt;
  pred(0, 0) = 6.0;
  gt.push_back({0, 0, 5.0});
  for (int x = 1; x < 10; ++x) {
    pred(x, 0) = 15.0;
    gt.push_back({x, 0, 12.0});
  }
  const auto b = binned_metrics(pred, Mask(10, 1, 1), gt, default_bin_edges());
  EXPECT_NEAR(b.aggregate.mae, 2.0, 1e-12);
  EXPECT_EQ(b.per_bin[0].n_points, 1u);
  EXPECT_EQ(b.per_bin[1].n_points, 9u);
  EXPECT_EQ(b.per_bin.size(), 11u);

  ImageD p2(2, 1, 10.0);
  std::vector<GroundTruthPoint> edge{{0, 0, 10.0}, {1, 0, 80.0}};
  const auto e = binned_metrics(p2, Mask(2, 1, 1), edge, default_bin_edges());
  EXPECT_EQ(e.per_bin[0].n_points, 0u);
  EXPECT_EQ(e.per_bin[1].n_points, 1u);   // 10 opens the second bin
  EXPECT_EQ(e.per_bin[10].n_points, 1u);  // 80 closes the last
}

TEST(Binned, AllPointsInOneBin) {
  ImageD pred(3, 1, 22.0);
  std::vector<GroundTruthPoint> gt{{0, 0, 20.0}, {1, 0, 21.0}, {2, 0, 23.0}};
  const auto b = binned_metrics(pred, Mask(3, 1, 1), gt, default_bin_edges());
  const auto& only = b.per_bin[2];
  EXPECT_EQ(only.n_points, 3u);
  EXPECT_EQ(b.aggregate.rmse, only.rmse);
  EXPECT_EQ(b.aggregate.mae, only.mae);
}

TEST(Binned, RejectsBadEdges) {
  ImageD pred(1, 1, 1.0);
  EXPECT_THROW(binned_metrics(pred, Mask(1, 1, 1), {}, {5.0}), std::invalid_argument);
  EXPECT_THROW(binned_metrics(pred, Mask(1, 1, 1), {}, {5.0, 5.0}), std::invalid_argument);
}

TEST(DensePoints, SkipsMissing) {
  ImageD d(3, 1);
  d(0, 0) = 5.0;
  d(1, 0) = 0.0;
  d(2, 0) = std::numeric_limits<double>::infinity();
  const auto pts = points_from_dense(d);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].depth, 5.0);
}
