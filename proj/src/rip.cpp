#include "gatedsim/rip.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace gatedsim {
namespace {

// Shape fractions (of the visible range width) for back-solved timings. These
// keep the order-6 fit within ~0.4% of peak; a zero gate edge would leave the
// trapezoid corners unresolvable below ~3%.
constexpr double kPulseFraction = 0.20;
constexpr double kGateFraction = 0.80;
constexpr double kEdgeFraction = 0.32;
constexpr int kCalibrationSamples = 2001;

double seconds_to_metres(double t) { return 0.5 * kSpeedOfLight * t; }
double metres_to_seconds(double m) { return 2.0 * m / kSpeedOfLight; }

// Gate window in range units: ramps 0->1 over [0, edge], open until
// base - edge, ramps back to 0 at base.
struct GateShape {
  double base;
  double edge;

  double value(double u) const {
    if (u <= 0.0 || u >= base) return 0.0;
    if (edge <= 0.0) return 1.0;
    if (u < edge) return u / edge;
    if (u > base - edge) return (base - u) / edge;
    return 1.0;
  }

  // Integral of value() over [0, u].
  double integral(double u) const {
    if (u <= 0.0) return 0.0;
    if (edge <= 0.0) return std::min(u, base);
    if (u >= base) return base - edge;
    if (u <= edge) return 0.5 * u * u / edge;
    if (u <= base - edge) return 0.5 * edge + (u - edge);
    const double rest = base - u;
    return (base - edge) - 0.5 * rest * rest / edge;
  }
};

struct RangeUnits {
  double start;  // gate opening, m
  GateShape gate;
  double pulse;  // m
  double peak;

  explicit RangeUnits(const GateTiming& t)
      : start(seconds_to_metres(t.delay_xi)),
        gate{seconds_to_metres(t.gate_duration),
             seconds_to_metres(t.gate_edge)},
        pulse(seconds_to_metres(t.pulse_duration)),
        peak(t.peak_response) {}

  // Overlap of the returning pulse [r, r + pulse] with the gate.
  double overlap(double r) const {
    return gate.integral(r + pulse - start) - gate.integral(r - start);
  }

  // Both shapes are symmetric and unimodal, so the best overlap is at
  // aligned centres.
  double max_overlap() const {
    return overlap(start + 0.5 * (gate.base - pulse));
  }
};

}  // namespace

void GateTiming::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid gate timing: " + what);
  };
  if (!(gate_duration > 0.0)) fail("gate_duration must be positive");
  if (!(pulse_duration > 0.0)) fail("pulse_duration must be positive");
  if (!(delay_xi >= 0.0)) fail("delay_xi must be non-negative");
  if (!(gate_edge >= 0.0)) fail("gate_edge must be non-negative");
  if (2.0 * gate_edge > gate_duration) fail("gate edges exceed gate_duration");
  if (!(peak_response > 0.0 && peak_response <= 1.0)) {
    fail("peak_response must lie in (0, 1]");
  }
  const auto vr = visible_range();
  if (!(vr.lo < vr.hi)) fail("empty visible range");
}

RangeInterval GateTiming::visible_range() const {
  return {seconds_to_metres(delay_xi - pulse_duration),
          seconds_to_metres(delay_xi + gate_duration)};
}

GateTiming GateTiming::from_range(double r_min, double r_max,
                                  double peak_response) {
  if (!(r_max > r_min) || r_min < 0.0) {
    throw std::invalid_argument("from_range: need 0 <= r_min < r_max");
  }
  const double width = r_max - r_min;
  const double pulse_m = kPulseFraction * width;
  GateTiming t;
  t.delay_xi = metres_to_seconds(r_min + pulse_m);
  t.pulse_duration = metres_to_seconds(pulse_m);
  t.gate_duration = metres_to_seconds(kGateFraction * width);
  t.gate_edge = metres_to_seconds(kEdgeFraction * width);
  t.peak_response = peak_response;
  t.validate();
  return t;
}

ChebyshevSeries::ChebyshevSeries(const ChebyshevCoeffs& coeffs,
                                 RangeInterval domain)
    : coeffs_(coeffs), domain_(domain) {
  if (!(domain.lo < domain.hi)) {
    throw std::invalid_argument("Chebyshev domain needs lo < hi");
  }
  // d/dx of sum c_k T_k: d_{k-1} = d_{k+1} + 2k c_k, with d_0 halved.
  dcoeffs_.fill(0.0);
  for (int k = kChebyshevOrder; k >= 1; --k) {
    const double next = (k + 1 <= kChebyshevOrder) ? dcoeffs_[k + 1] : 0.0;
    dcoeffs_[k - 1] = next + 2.0 * k * coeffs_[k];
  }
  dcoeffs_[0] *= 0.5;
}

double ChebyshevSeries::to_unit(double r) const {
  const double x = (2.0 * r - domain_.lo - domain_.hi) / domain_.width();
  return std::clamp(x, -1.0, 1.0);
}

namespace {
double clenshaw(const ChebyshevCoeffs& c, int degree, double x) {
  double b1 = 0.0;
  double b2 = 0.0;
  for (int k = degree; k >= 1; --k) {
    const double b0 = c[k] + 2.0 * x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c[0] + x * b1 - b2;
}
}  // namespace

double ChebyshevSeries::value(double r) const {
  return clenshaw(coeffs_, kChebyshevOrder, to_unit(r));
}

double ChebyshevSeries::derivative(double r) const {
  const double x = (2.0 * r - domain_.lo - domain_.hi) / domain_.width();
  if (x < -1.0 || x > 1.0) return 0.0;
  return clenshaw(dcoeffs_, kChebyshevOrder - 1, x) * 2.0 / domain_.width();
}

RangeIntensityProfile::RangeIntensityProfile(int slice_index,
                                             const GateTiming& timing,
                                             const ChebyshevSeries& series)
    : slice_index_(slice_index), timing_(timing), series_(series) {
  if (slice_index < 0 || slice_index >= kNumSlices) {
    throw std::invalid_argument("slice_index must be 0, 1 or 2");
  }
  timing_.validate();
  visible_ = timing_.visible_range();
}

double RangeIntensityProfile::eval(double r, ProfileMode mode) const {
  if (mode == ProfileMode::kAnalytic) return analytic_profile(timing_, r);
  if (!(r > visible_.lo && r < visible_.hi)) return 0.0;
  return std::max(0.0, series_.value(r));
}

double RangeIntensityProfile::derivative(double r, ProfileMode mode) const {
  if (mode == ProfileMode::kAnalytic) {
    return analytic_profile_derivative(timing_, r);
  }
  if (!(r > visible_.lo && r < visible_.hi)) return 0.0;
  if (series_.value(r) <= 0.0) return 0.0;
  return series_.derivative(r);
}

double analytic_profile(const GateTiming& timing, double r) {
  if (r < 0.0) return 0.0;
  const RangeUnits u(timing);
  const double o = u.overlap(r);
  if (o <= 0.0) return 0.0;
  return u.peak * o / u.max_overlap();
}

double analytic_profile_derivative(const GateTiming& timing, double r) {
  if (r < 0.0) return 0.0;
  const RangeUnits u(timing);
  const double d = u.gate.value(r + u.pulse - u.start) - u.gate.value(r - u.start);
  return u.peak * d / u.max_overlap();
}

ChebyshevCoeffs fit_chebyshev(std::span<const ProfileSample> samples,
                              RangeInterval domain) {
  if (!(domain.lo < domain.hi)) {
    throw CalibrationError("calibration domain needs r_lo < r_hi");
  }
  if (samples.size() < kChebyshevTerms + 1) {
    throw CalibrationError("need at least " +
                           std::to_string(kChebyshevTerms + 1) +
                           " samples, got " + std::to_string(samples.size()));
  }
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!std::isfinite(s.r) || !std::isfinite(s.intensity)) {
      throw CalibrationError("non-finite calibration sample");
    }
    distinct.insert(s.r);
  }
  if (distinct.size() < static_cast<std::size_t>(kChebyshevTerms)) {
    throw CalibrationError("rank-deficient samples: " +
                           std::to_string(distinct.size()) +
                           " distinct ranges for " +
                           std::to_string(kChebyshevTerms) + " coefficients");
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd basis(n, kChebyshevTerms);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x =
        (2.0 * samples[i].r - domain.lo - domain.hi) / domain.width();
    basis(i, 0) = 1.0;
    basis(i, 1) = x;
    for (int k = 1; k < kChebyshevOrder; ++k) {
      basis(i, k + 1) = 2.0 * x * basis(i, k) - basis(i, k - 1);
    }
    rhs(i) = samples[i].intensity;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < kChebyshevTerms) {
    throw CalibrationError("rank-deficient Chebyshev design matrix");
  }
  const Eigen::VectorXd sol = qr.solve(rhs);
  ChebyshevCoeffs out{};
  for (int k = 0; k < kChebyshevTerms; ++k) out[k] = sol(k);
  return out;
}

std::vector<ProfileSample> sample_analytic(const GateTiming& timing,
                                           RangeInterval domain, int count) {
  if (count < 2) throw std::invalid_argument("sample_analytic: count < 2");
  std::vector<ProfileSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double r = domain.lo + domain.width() * i / (count - 1);
    out.push_back({r, analytic_profile(timing, r)});
  }
  return out;
}

RangeIntensityProfile calibrate_analytic(int slice_index,
                                         const GateTiming& timing,
                                         double margin) {
  timing.validate();
  const auto vr = timing.visible_range();
  const RangeInterval domain{std::max(0.0, vr.lo - margin), vr.hi + margin};
  const auto samples = sample_analytic(timing, domain, kCalibrationSamples);
  return RangeIntensityProfile(
      slice_index, timing, ChebyshevSeries(fit_chebyshev(samples, domain), domain));
}

ProfileSet default_profiles() {
  ProfileSet out;
  for (int i = 0; i < kNumSlices; ++i) {
    const auto& range = kDefaultSliceRanges[i];
    out[i] = calibrate_analytic(i, GateTiming::from_range(range.lo, range.hi));
  }
  return out;
}

double eval_profile(const RangeIntensityProfile& profile, double r,
                    ProfileMode mode) {
  return profile.eval(r, mode);
}

double eval_profile_derivative(const RangeIntensityProfile& profile, double r,
                               ProfileMode mode) {
  return profile.derivative(r, mode);
}

}  // namespace gatedsim
