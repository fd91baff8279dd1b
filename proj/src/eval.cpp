#include "gatedsim/eval.hpp"

#include "gatedsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gatedsim {

MetricsReport compute_metrics(const ImageD& pred, const Mask& validity,
                              std::span<const GroundTruthPoint> gt,
                              const EvalOptions& options) {
  require_same_shape(pred, validity, "compute_metrics");
  MetricsReport rep;
  rep.range = options.range;

  std::vector<double> sq, abs_err, rel;
  std::array<std::vector<double>, 3> hits;
  std::array<double, 3> thresholds{};
  for (int i = 0; i < 3; ++i) {
    thresholds[i] = options.delta_exponential
                        ? std::pow(options.delta_base, i + 1)
                        : options.delta_base * (i + 1);
  }

  for (const auto& p : gt) {
    if (!pred.contains(p.x, p.y)) continue;
    if (!(p.depth >= options.range.lo && p.depth <= options.range.hi)) continue;
    ++rep.n_in_range;
    const double d = pred(p.x, p.y);
    if (!validity(p.x, p.y) || !std::isfinite(d) || !(d > 0.0)) continue;
    const double err = d - p.depth;
    sq.push_back(err * err);
    abs_err.push_back(std::abs(err));
    rel.push_back(std::abs(err) / p.depth);
    const double ratio = std::max(d / p.depth, p.depth / d);
    for (int i = 0; i < 3; ++i) hits[i].push_back(ratio < thresholds[i] ? 1.0 : 0.0);
  }

  rep.n_points = sq.size();
  if (rep.n_in_range > 0) {
    rep.completeness =
        static_cast<double>(rep.n_points) / static_cast<double>(rep.n_in_range);
  }
  if (rep.n_points == 0) return rep;
  rep.empty = false;
  const double n = static_cast<double>(rep.n_points);
  rep.rmse = std::sqrt(pairwise_sum(sq) / n);
  rep.mae = pairwise_sum(abs_err) / n;
  rep.ard = pairwise_sum(rel) / n;
  rep.delta1 = pairwise_sum(hits[0]) / n;
  rep.delta2 = pairwise_sum(hits[1]) / n;
  rep.delta3 = pairwise_sum(hits[2]) / n;
  return rep;
}

MetricsReport compute_metrics(const DepthMap& pred,
                              std::span<const GroundTruthPoint> gt,
                              const EvalOptions& options) {
  return compute_metrics(pred.depth, pred.validity, gt, options);
}

std::vector<double> default_bin_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 11; ++i) edges.push_back(3.0 + 7.0 * i);
  return edges;
}

BinnedReport binned_metrics(const ImageD& pred, const Mask& validity,
                            std::span<const GroundTruthPoint> gt,
                            const std::vector<double>& edges,
                            const EvalOptions& options) {
  if (edges.size() < 2) throw std::invalid_argument("binned_metrics: need >= 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw std::invalid_argument("binned_metrics: edges must increase strictly");
    }
  }
  const std::size_t bins = edges.size() - 1;
  std::vector<std::vector<GroundTruthPoint>> members(bins);
  for (const auto& p : gt) {
    const double d = p.depth;
    if (!(d >= edges.front() && d <= edges.back())) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), d);
    std::size_t j = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (j >= bins) j = bins - 1;  // d == last edge
    members[j].push_back(p);
  }

  BinnedReport out;
  out.bin_edges = edges;
  out.aggregate.range = options.range;
  std::vector<double> rmse, mae, ard, d1, d2, d3, compl_;
  for (std::size_t j = 0; j < bins; ++j) {
    out.per_bin.push_back(compute_metrics(pred, validity, members[j], options));
    const auto& b = out.per_bin.back();
    out.aggregate.n_points += b.n_points;
    out.aggregate.n_in_range += b.n_in_range;
    if (b.n_in_range > 0) compl_.push_back(b.completeness);
    if (b.empty) continue;
    rmse.push_back(b.rmse);
    mae.push_back(b.mae);
    ard.push_back(b.ard);
    d1.push_back(b.delta1);
    d2.push_back(b.delta2);
    d3.push_back(b.delta3);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
  };
  auto& a = out.aggregate;
  a.completeness = mean(compl_);
  if (!rmse.empty()) {
    a.empty = false;
    a.rmse = mean(rmse);
    a.mae = mean(mae);
    a.ard = mean(ard);
    a.delta1 = mean(d1);
    a.delta2 = mean(d2);
    a.delta3 = mean(d3);
  }
  return out;
}

std::vector<GroundTruthPoint> points_from_dense(const ImageD& depth) {
  std::vector<GroundTruthPoint> out;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth(x, y);
      if (std::isfinite(d) && d > 0.0) out.push_back({x, y, d});
    }
  }
  return out;
}

}  // namespace gatedsim
