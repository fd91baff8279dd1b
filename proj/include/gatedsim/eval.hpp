#pragma once

#include "gatedsim/image.hpp"
#include "gatedsim/inversion.hpp"
#include "gatedsim/rip.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace gatedsim {

struct GroundTruthPoint {
  int x = 0;
  int y = 0;
  double depth = 0.0;  // metres
};

struct EvalOptions {
  RangeInterval range{3.0, 80.0};  // inclusive
  double delta_base = 1.25;
  // delta_i threshold is base^i; with false it is base * i.
  bool delta_exponential = true;
};

struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double ard = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  double completeness = 0.0;
  std::size_t n_points = 0;     // in range with a valid prediction
  std::size_t n_in_range = 0;   // in range, valid or not
  RangeInterval range{};
  bool empty = true;            // no usable point; metrics are zero, not NaN
};

/// Ground-truth points outside the image are ignored. Points outside
/// `options.range` are dropped; in-range points without a valid prediction
/// only lower completeness.
MetricsReport compute_metrics(const ImageD& pred, const Mask& validity,
                              std::span<const GroundTruthPoint> gt,
                              const EvalOptions& options = {});
MetricsReport compute_metrics(const DepthMap& pred,
                              std::span<const GroundTruthPoint> gt,
                              const EvalOptions& options = {});

struct BinnedReport {
  std::vector<double> bin_edges;
  std::vector<MetricsReport> per_bin;
  MetricsReport aggregate;  // unweighted mean over non-empty bins
};

/// 11 bins of 7 m over [3, 80].
std::vector<double> default_bin_edges();

/// Bins are [e_j, e_j+1) except the last, which is closed.
BinnedReport binned_metrics(const ImageD& pred, const Mask& validity,
                            std::span<const GroundTruthPoint> gt,
                            const std::vector<double>& edges,
                            const EvalOptions& options = {});

/// Dense ground truth to points; values <= 0 or non-finite are missing.
std::vector<GroundTruthPoint> points_from_dense(const ImageD& depth);

}  // namespace gatedsim
