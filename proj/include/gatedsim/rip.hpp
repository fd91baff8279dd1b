#pragma once

// Range-intensity profiles C_i(r): the overlap of a gate window and a laser
// pulse as a function of target range, plus the order-6 Chebyshev model
// used everywhere downstream.

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace gatedsim {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr int kChebyshevOrder = 6;
inline constexpr int kChebyshevTerms = kChebyshevOrder + 1;
inline constexpr int kNumSlices = 3;

/// Raised for rank-deficient or malformed calibration input.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RangeInterval {
  double lo = 0.0;  // metres
  double hi = 0.0;  // metres
  double width() const { return hi - lo; }
  bool contains(double r) const { return r >= lo && r <= hi; }
};

/// Gate and pulse timing of one slice.
///
/// The gate opens at `delay_xi` after the laser fires, ramps linearly to full
/// sensitivity over `gate_edge`, stays open, and ramps back down so that it
/// is fully closed at `delay_xi + gate_duration`. The pulse is a rectangle of
/// length `pulse_duration`. With gate_edge == 0 the profile is the classic
/// trapezoid.
struct GateTiming {
  double delay_xi = 0.0;        // s
  double gate_duration = 0.0;   // s, base width of the gate window
  double pulse_duration = 0.0;  // s
  double gate_edge = 0.0;       // s, rise (= fall) time of the gate
  double peak_response = 1.0;   // amplitude of C_i at best overlap

  /// Throws std::invalid_argument when any invariant is violated.
  void validate() const;

  /// Ranges with non-zero overlap: (c(xi - pulse)/2, c(xi + gate)/2).
  RangeInterval visible_range() const;

  /// Back-solves a timing whose visible range is [r_min, r_max]. Pulse,
  /// gate base and gate edge are fixed fractions of the range width.
  static GateTiming from_range(double r_min, double r_max,
                               double peak_response = 1.0);
};

using ChebyshevCoeffs = std::array<double, kChebyshevTerms>;

/// Chebyshev series sum_k c_k T_k(x) with x the affine image of r in
/// [lo, hi] -> [-1, 1]. Queries outside [lo, hi] clamp x.
class ChebyshevSeries {
 public:
  ChebyshevSeries() = default;
  ChebyshevSeries(const ChebyshevCoeffs& coeffs, RangeInterval domain);

  const ChebyshevCoeffs& coeffs() const { return coeffs_; }
  RangeInterval domain() const { return domain_; }

  double to_unit(double r) const;  // clamped to [-1, 1]
  double value(double r) const;     // Clenshaw
  double derivative(double r) const;  // d/dr, zero where x is clamped

 private:
  ChebyshevCoeffs coeffs_{};
  RangeInterval domain_{-1.0, 1.0};
  ChebyshevCoeffs dcoeffs_{};  // coefficients of d/dx
};

enum class ProfileMode { kAnalytic, kChebyshev };

struct ProfileSample {
  double r = 0.0;
  double intensity = 0.0;
};

class RangeIntensityProfile {
 public:
  RangeIntensityProfile() = default;
  RangeIntensityProfile(int slice_index, const GateTiming& timing,
                        const ChebyshevSeries& series);

  int slice_index() const { return slice_index_; }
  const GateTiming& timing() const { return timing_; }
  const ChebyshevSeries& series() const { return series_; }
  RangeInterval visible_range() const { return visible_; }

  double eval(double r, ProfileMode mode) const;
  double derivative(double r, ProfileMode mode) const;

 private:
  int slice_index_ = 0;
  GateTiming timing_{};
  ChebyshevSeries series_{};
  RangeInterval visible_{};
};

using ProfileSet = std::array<RangeIntensityProfile, kNumSlices>;

/// Closed-form C_i(r) for the gate/pulse pair. Zero outside the visible
/// range; 0 for r < 0.
double analytic_profile(const GateTiming& timing, double r);
double analytic_profile_derivative(const GateTiming& timing, double r);

/// Least-squares fit of T_0..T_6 on the affine map of `domain`.
ChebyshevCoeffs fit_chebyshev(std::span<const ProfileSample> samples,
                              RangeInterval domain);

/// Samples the analytic profile on `count` evenly spaced ranges.
std::vector<ProfileSample> sample_analytic(const GateTiming& timing,
                                           RangeInterval domain, int count);

/// Builds a profile whose Chebyshev model is fitted to its analytic form on
/// the visible range widened by `margin` metres on both sides.
RangeIntensityProfile calibrate_analytic(int slice_index,
                                         const GateTiming& timing,
                                         double margin = 1.0);

/// Gates covering 3-72 m, 18-123 m and 57-176 m.
ProfileSet default_profiles();

inline constexpr std::array<RangeInterval, kNumSlices> kDefaultSliceRanges{
    RangeInterval{3.0, 72.0}, RangeInterval{18.0, 123.0},
    RangeInterval{57.0, 176.0}};

double eval_profile(const RangeIntensityProfile& profile, double r,
                    ProfileMode mode = ProfileMode::kChebyshev);
double eval_profile_derivative(const RangeIntensityProfile& profile, double r,
                               ProfileMode mode = ProfileMode::kChebyshev);

}  // namespace gatedsim
