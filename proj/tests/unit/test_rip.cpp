#include "gatedsim/rip.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gatedsim;

namespace {

ChebyshevSeries unit_series(ChebyshevCoeffs c, RangeInterval dom = {10.0, 50.0}) {
  return ChebyshevSeries(c, dom);
}

GateTiming triangle_timing() {
  GateTiming t;
  t.delay_xi = 200e-9;
  t.gate_duration = 100e-9;
  t.pulse_duration = 100e-9;
  return t;
}

}  // namespace

TEST(GateTiming, RejectsBadDurations) {
  GateTiming t = triangle_timing();
  t.gate_duration = 0.0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = triangle_timing();
  t.pulse_duration = -1e-9;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = triangle_timing();
  t.delay_xi = -1e-9;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = triangle_timing();
  t.gate_edge = 0.6 * t.gate_duration;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  EXPECT_NO_THROW(triangle_timing().validate());
}

TEST(GateTiming, FromRangeReproducesVisibleRange) {
  for (const auto& range : kDefaultSliceRanges) {
    const auto vr = GateTiming::from_range(range.lo, range.hi).visible_range();
    EXPECT_NEAR(vr.lo, range.lo, 1e-9);
    EXPECT_NEAR(vr.hi, range.hi, 1e-9);
  }
}

TEST(AnalyticProfile, ZeroFarOutsideGate) {
  for (const auto& p : default_profiles()) {
    EXPECT_EQ(analytic_profile(p.timing(), 10.0 * p.visible_range().hi), 0.0);
  }
}

TEST(AnalyticProfile, PeakAtAlignedCentres) {
  const GateTiming t = triangle_timing();
  const double centre = 0.5 * kSpeedOfLight * t.delay_xi;  // pulse == gate
  EXPECT_NEAR(analytic_profile(t, centre), t.peak_response, 1e-12);
}

TEST(AnalyticProfile, RampMidpointIsHalfForEqualDurations) {
  const GateTiming t = triangle_timing();
  const auto vr = t.visible_range();
  const double centre = 0.5 * (vr.lo + vr.hi);
  const double mid = 0.5 * (vr.lo + centre);
  EXPECT_NEAR(analytic_profile(t, mid), 0.5, 1e-12);
  EXPECT_NEAR(oracle::quadrature_profile(t, mid), 0.5, 1e-9);
}

TEST(AnalyticProfile, MatchesQuadratureOnRandomRanges) {
  std::mt19937_64 rng(11);
  for (const auto& p : default_profiles()) {
    const auto vr = p.visible_range();
    std::uniform_real_distribution<double> u(vr.lo - 5.0, vr.hi + 5.0);
    for (int k = 0; k < 100; ++k) {
      const double r = std::max(0.0, u(rng));
      EXPECT_NEAR(analytic_profile(p.timing(), r), oracle::quadrature_profile(p.timing(), r), 1e-9)
          << "slice " << p.slice_index() << " r=" << r;
    }
  }
}

TEST(AnalyticProfile, IntegralScalesWithGateTimesPulse) {
  // Unnormalised exposure integrated over r equals (c/2) * area(gate) * pulse.
  for (const auto& p : default_profiles()) {
    const auto& t = p.timing();
    const auto vr = p.visible_range();
    const int n = 20000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double r = vr.lo + (k + 0.5) * vr.width() / n;
      sum += oracle::exposure_integral(t, r);
    }
    sum *= vr.width() / n;
    const double gate_area = t.gate_duration - t.gate_edge;
    EXPECT_NEAR(sum / (0.5 * kSpeedOfLight * gate_area * t.pulse_duration), 1.0, 1e-6);

    double normalised = 0.0;
    for (int k = 0; k < n; ++k) {
      normalised += analytic_profile(t, vr.lo + (k + 0.5) * vr.width() / n);
    }
    normalised *= vr.width() / n;
    const double peak_exposure = oracle::exposure_integral(t, vr.lo + 0.5 * vr.width());
    EXPECT_NEAR(normalised * peak_exposure / sum, 1.0, 1e-6);
  }
}

TEST(AnalyticProfile, MonotoneOnRamps) {
  for (const auto& p : default_profiles()) {
    const auto vr = p.visible_range();
    const double centre = 0.5 * (vr.lo + vr.hi);
    double prev = analytic_profile(p.timing(), vr.lo);
    for (int k = 1; k <= 2000; ++k) {
      const double v = analytic_profile(p.timing(), vr.lo + (centre - vr.lo) * k / 2000.0);
      EXPECT_GE(v, prev - 1e-15);
      prev = v;
    }
    for (int k = 1; k <= 2000; ++k) {
      const double v = analytic_profile(p.timing(), centre + (vr.hi - centre) * k / 2000.0);
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(AnalyticProfile, DerivativeMatchesFiniteDifference) {
  const auto profiles = default_profiles();
  std::mt19937_64 rng(5);
  for (const auto& p : profiles) {
    const auto vr = p.visible_range();
    std::uniform_real_distribution<double> u(vr.lo + 0.5, vr.hi - 0.5);
    for (int k = 0; k < 50; ++k) {
      const double r = u(rng);
      const double h = 1e-5;
      const double fd = (analytic_profile(p.timing(), r + h) - analytic_profile(p.timing(), r - h)) / (2 * h);
      EXPECT_NEAR(analytic_profile_derivative(p.timing(), r), fd, 1e-6);
    }
  }
}

TEST(DefaultProfiles, VisibleRangesAndZeros) {
  const auto p = default_profiles();
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(p[i].slice_index(), i);
    EXPECT_NEAR(p[i].visible_range().lo, kDefaultSliceRanges[i].lo, 1e-9);
    EXPECT_NEAR(p[i].visible_range().hi, kDefaultSliceRanges[i].hi, 1e-9);
  }
  for (auto mode : {ProfileMode::kAnalytic, ProfileMode::kChebyshev}) {
    EXPECT_EQ(eval_profile(p[0], 100.0, mode), 0.0);
    EXPECT_EQ(eval_profile(p[2], 30.0, mode), 0.0);
    EXPECT_GT(eval_profile(p[0], 70.0, mode), 0.0);
    EXPECT_GT(eval_profile(p[1], 70.0, mode), 0.0);
  }
  EXPECT_EQ(eval_profile(p[0], 3.0, ProfileMode::kAnalytic), 0.0);
  EXPECT_EQ(eval_profile(p[0], 72.0, ProfileMode::kAnalytic), 0.0);
}

TEST(DefaultProfiles, ChebyshevFitWithinTwoPercent) {
  for (const auto& p : default_profiles()) {
    const auto dom = p.series().domain();
    EXPECT_NEAR(dom.lo, p.visible_range().lo - 1.0, 1e-12);
    EXPECT_NEAR(dom.hi, p.visible_range().hi + 1.0, 1e-12);
    double worst = 0.0;
    for (int k = 0; k <= 10000; ++k) {
      const double r = dom.lo + dom.width() * k / 10000.0;
      worst = std::max(worst, std::abs(p.eval(r, ProfileMode::kChebyshev) -
                                       p.eval(r, ProfileMode::kAnalytic)));
    }
    EXPECT_LE(worst, 0.02 * p.timing().peak_response) << "slice " << p.slice_index();
  }
}

TEST(DefaultProfiles, NonNegativeEverywhere) {
  for (const auto& p : default_profiles()) {
    for (int k = 0; k <= 4000; ++k) {
      const double r = 0.05 * k;
      EXPECT_GE(p.eval(r, ProfileMode::kChebyshev), 0.0);
      EXPECT_GE(p.eval(r, ProfileMode::kAnalytic), 0.0);
    }
  }
}

TEST(Chebyshev, ClenshawMatchesRecurrence) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ChebyshevCoeffs c;
    for (auto& v : c) v = u(rng);
    const auto s = unit_series(c, {-1.0, 1.0});
    for (int k = 0; k < 50; ++k) {
      const double x = u(rng);
      EXPECT_NEAR(s.value(x), oracle::chebyshev_direct(c, x), 1e-13);
    }
  }
}

TEST(Chebyshev, ConstantAndLinearSeries) {
  const auto one = unit_series({1, 0, 0, 0, 0, 0, 0});
  const auto lin = unit_series({0, 1, 0, 0, 0, 0, 0});
  for (double r : {10.0, 17.5, 33.3, 50.0}) {
    EXPECT_DOUBLE_EQ(one.value(r), 1.0);
    EXPECT_EQ(one.derivative(r), 0.0);
    EXPECT_NEAR(lin.derivative(r), 2.0 / 40.0, 1e-15);
  }
  // Outside the domain the argument is clamped.
  EXPECT_DOUBLE_EQ(lin.value(100.0), 1.0);
  EXPECT_DOUBLE_EQ(lin.value(-100.0), -1.0);
  EXPECT_EQ(lin.derivative(100.0), 0.0);
}

TEST(Chebyshev, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const RangeInterval dom{18.0, 123.0};
  ChebyshevCoeffs c;
  for (auto& v : c) v = u(rng);
  const auto s = unit_series(c, dom);
  std::uniform_real_distribution<double> ur(dom.lo + 0.01, dom.hi - 0.01);
  for (int k = 0; k < 50; ++k) {
    const double r = ur(rng);
    const double h = 1e-3;
    const double fd = (s.value(r + h) - s.value(r - h)) / (2 * h);
    const double d = s.derivative(r);
    EXPECT_LT(std::abs(d - fd), 1e-5 * std::max(std::abs(d), 1e-3)) << "r=" << r;
  }
}

TEST(FitChebyshev, RecoversBasisFunctions) {
  const RangeInterval dom{5.0, 25.0};
  std::vector<ProfileSample> constant, linear;
  for (int k = 0; k < 40; ++k) {
    const double r = dom.lo + dom.width() * k / 39.0;
    constant.push_back({r, 1.0});
    linear.push_back({r, (2.0 * r - dom.lo - dom.hi) / dom.width()});
  }
  const auto c0 = fit_chebyshev(constant, dom);
  const auto c1 = fit_chebyshev(linear, dom);
  for (int k = 0; k < kChebyshevTerms; ++k) {
    EXPECT_NEAR(c0[k], k == 0 ? 1.0 : 0.0, 1e-12);
    EXPECT_NEAR(c1[k], k == 1 ? 1.0 : 0.0, 1e-12);
  }
}

TEST(FitChebyshev, AgreesWithNormalEquationsOracle) {
  const auto p = default_profiles()[1];
  const auto dom = p.series().domain();
  const auto samples = sample_analytic(p.timing(), dom, 1000);
  const auto c = fit_chebyshev(samples, dom);
  const ChebyshevSeries s(c, dom);
  double sq = 0.0;
  for (const auto& q : samples) sq += std::pow(s.value(q.r) - q.intensity, 2);
  EXPECT_NEAR(std::sqrt(sq), oracle::monomial_fit_residual(samples, dom), 1e-9);
}

TEST(FitChebyshev, NoWorseThanAnySingleBasisFit) {
  const auto p = default_profiles()[0];
  const auto dom = p.series().domain();
  const auto samples = sample_analytic(p.timing(), dom, 500);
  const ChebyshevSeries s(fit_chebyshev(samples, dom), dom);
  double full = 0.0;
  for (const auto& q : samples) full += std::pow(s.value(q.r) - q.intensity, 2);
  for (int k = 0; k < kChebyshevTerms; ++k) {
    ChebyshevCoeffs e{};
    e[k] = 1.0;
    const ChebyshevSeries basis(e, dom);
    double bb = 0.0, by = 0.0;
    for (const auto& q : samples) {
      bb += basis.value(q.r) * basis.value(q.r);
      by += basis.value(q.r) * q.intensity;
    }
    double single = 0.0;
    for (const auto& q : samples) single += std::pow(by / bb * basis.value(q.r) - q.intensity, 2);
    EXPECT_LE(full, single + 1e-12);
  }
}

TEST(FitChebyshev, RejectsDegenerateInput) {
  const RangeInterval dom{0.0, 10.0};
  std::vector<ProfileSample> few{{1, 0}, {2, 0}, {3, 0}};
  EXPECT_THROW(fit_chebyshev(few, dom), CalibrationError);
  std::vector<ProfileSample> repeated;
  for (int k = 0; k < 20; ++k) repeated.push_back({static_cast<double>(k % 3), 1.0});
  EXPECT_THROW(fit_chebyshev(repeated, dom), CalibrationError);
  std::vector<ProfileSample> ok;
  for (int k = 0; k < 20; ++k) ok.push_back({0.5 * k, 1.0});
  EXPECT_THROW(fit_chebyshev(ok, {5.0, 5.0}), CalibrationError);
}
