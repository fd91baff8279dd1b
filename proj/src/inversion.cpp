#include "gatedsim/inversion.hpp"

#include "gatedsim/masks.hpp"
#include "gatedsim/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gatedsim {
namespace {

using Triple = std::array<double, kNumSlices>;

struct Observation {
  Triple z;
  double zp;
};

struct LinearFit {
  double a = 0.0;
  double l = 0.0;
  double objective = 0.0;
  double slice_residual = 0.0;
};

double evaluate(const Observation& obs, const Triple& c, double a, double l,
                double passive_weight, double* slice_residual) {
  double s = 0.0;
  for (int i = 0; i < kNumSlices; ++i) {
    const double e = obs.z[i] - a * c[i] - l;
    s += e * e;
  }
  if (slice_residual != nullptr) *slice_residual = s;
  const double ep = obs.zp - l;
  return s + passive_weight * ep * ep;
}

// Box-constrained linear least squares for (a, l) at fixed profile values.
LinearFit fit_linear(const Observation& obs, const Triple& c,
                     const SolverOptions& opt) {
  const double w = opt.passive_weight;
  double scc = 0.0, sc = 0.0, scz = 0.0, sz = 0.0;
  for (int i = 0; i < kNumSlices; ++i) {
    scc += c[i] * c[i];
    sc += c[i];
    scz += c[i] * obs.z[i];
    sz += obs.z[i];
  }
  const double sll = kNumSlices + w;
  const double slz = sz + w * obs.zp;

  auto best_l_for = [&](double a) {
    return std::clamp((slz - a * sc) / sll, 0.0, 1.0);
  };
  auto best_a_for = [&](double l) {
    if (scc <= 0.0) return 0.0;
    return std::clamp((scz - l * sc) / scc, 0.0, opt.albedo_max);
  };

  LinearFit best;
  best.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](double a, double l) {
    double sr = 0.0;
    const double f = evaluate(obs, c, a, l, w, &sr);
    if (f < best.objective) best = {a, l, f, sr};
  };

  const double det = scc * sll - sc * sc;
  if (det > 1e-14 * std::max(1.0, scc * sll)) {
    const double a = (scz * sll - sc * slz) / det;
    const double l = (scc * slz - sc * scz) / det;
    if (a >= 0.0 && a <= opt.albedo_max && l >= 0.0 && l <= 1.0) {
      consider(a, l);
      return best;
    }
  }
  // Optimum lies on the boundary: try each face.
  for (double a : {0.0, opt.albedo_max}) consider(a, best_l_for(a));
  for (double l : {0.0, 1.0}) consider(best_a_for(l), l);
  if (scc <= 0.0) consider(0.0, best_l_for(0.0));
  return best;
}

Triple profile_values(const ProfileSet& profiles, double r, ProfileMode mode) {
  Triple c{};
  for (int i = 0; i < kNumSlices; ++i) c[i] = profiles[i].eval(r, mode);
  return c;
}

Triple profile_slopes(const ProfileSet& profiles, double r, ProfileMode mode) {
  Triple d{};
  for (int i = 0; i < kNumSlices; ++i) d[i] = profiles[i].derivative(r, mode);
  return d;
}

struct Candidate {
  double r = 0.0;
  LinearFit fit;
  int iterations = 0;
};

class PixelSolver {
 public:
  PixelSolver(const Observation& obs, const ProfileLookup& lookup)
      : obs_(obs), lookup_(lookup), opt_(lookup.options()) {}

  LinearFit fit_at(double r) const {
    return fit_linear(obs_, profile_values(lookup_.profiles(), r, opt_.mode),
                      opt_);
  }

  // Best grid point of the full objective.
  double grid_start() const {
    double best_r = lookup_.range(0);
    double best_f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lookup_.size(); ++i) {
      const double f = fit_linear(obs_, lookup_.values(i), opt_).objective;
      if (f < best_f) {
        best_f = f;
        best_r = lookup_.range(i);
      }
    }
    return best_r;
  }

  Candidate refine(double r0) const {
    Candidate cur{std::clamp(r0, opt_.r_min, opt_.r_max), {}, 0};
    cur.fit = fit_at(cur.r);
    const double sw = std::sqrt(opt_.passive_weight);
    for (int it = 0; it < opt_.max_iterations; ++it) {
      cur.iterations = it + 1;
      const Triple c = profile_values(lookup_.profiles(), cur.r, opt_.mode);
      const Triple dc = profile_slopes(lookup_.profiles(), cur.r, opt_.mode);
      Eigen::Matrix<double, 4, 3> jac;
      Eigen::Vector4d res;
      for (int i = 0; i < kNumSlices; ++i) {
        res(i) = obs_.z[i] - cur.fit.a * c[i] - cur.fit.l;
        jac.row(i) << -cur.fit.a * dc[i], -c[i], -1.0;
      }
      res(3) = sw * (obs_.zp - cur.fit.l);
      jac.row(3) << 0.0, 0.0, -sw;

      Eigen::Matrix3d jtj = jac.transpose() * jac;
      jtj.diagonal() *= 1.0 + 1e-10;
      const Eigen::Vector3d step = jtj.ldlt().solve(-(jac.transpose() * res));
      double dr = step(0);
      if (!std::isfinite(dr) || jtj(0, 0) <= 0.0) {
        return golden(cur);
      }
      if (std::abs(dr) < opt_.step_tolerance) {
        // Final tiny step still counts if it helps.
        const double rn = std::clamp(cur.r + dr, opt_.r_min, opt_.r_max);
        const LinearFit fn = fit_at(rn);
        if (fn.objective <= cur.fit.objective) {
          cur.r = rn;
          cur.fit = fn;
        }
        return cur;
      }
      bool accepted = false;
      for (int halving = 0; halving < 12; ++halving) {
        const double rn = std::clamp(cur.r + dr, opt_.r_min, opt_.r_max);
        const LinearFit fn = fit_at(rn);
        if (fn.objective < cur.fit.objective) {
          const double moved = rn - cur.r;
          cur.r = rn;
          cur.fit = fn;
          accepted = true;
          if (std::abs(moved) < opt_.step_tolerance) return cur;
          break;
        }
        dr *= 0.5;
        if (std::abs(dr) < 0.1 * opt_.step_tolerance) break;
      }
      if (!accepted) return golden(cur);
    }
    return cur;
  }

 private:
  // Golden-section search on the reduced objective around the current point.
  Candidate golden(Candidate cur) const {
    constexpr double kInvPhi = 0.6180339887498949;
    double lo = std::max(opt_.r_min, cur.r - opt_.grid_step);
    double hi = std::min(opt_.r_max, cur.r + opt_.grid_step);
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = fit_at(x1).objective;
    double f2 = fit_at(x2).objective;
    while (hi - lo > 0.1 * opt_.step_tolerance) {
      ++cur.iterations;
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kInvPhi * (hi - lo);
        f1 = fit_at(x1).objective;
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kInvPhi * (hi - lo);
        f2 = fit_at(x2).objective;
      }
    }
    const double r = 0.5 * (lo + hi);
    const LinearFit f = fit_at(r);
    if (f.objective < cur.fit.objective) {
      cur.r = r;
      cur.fit = f;
    }
    return cur;
  }

  Observation obs_;
  const ProfileLookup& lookup_;
  const SolverOptions& opt_;
};

}  // namespace

ProfileLookup::ProfileLookup(const ProfileSet& profiles,
                             const SolverOptions& options)
    : profiles_(profiles), options_(options) {
  if (!(options.r_min < options.r_max) || !(options.grid_step > 0.0)) {
    throw std::invalid_argument("solver options: bad range grid");
  }
  const auto n = static_cast<std::size_t>(
      std::floor((options.r_max - options.r_min) / options.grid_step + 1e-9)) + 1;
  ranges_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = options.r_min + options.grid_step * static_cast<double>(i);
    ranges_.push_back(r);
    const Triple c = profile_values(profiles_, r, options.mode);
    values_.push_back(c);
    const double sum = c[0] + c[1] + c[2];
    Triple nrm{};
    if (sum > 0.0) {
      for (int k = 0; k < kNumSlices; ++k) nrm[k] = c[k] / sum;
    }
    normalized_.push_back(nrm);
  }
}

double ProfileLookup::ratio_depth(double z0, double z1, double z2,
                                  double zp) const {
  const Triple z{z0, z1, z2};
  const double spread = std::max({z0, z1, z2}) - std::min({z0, z1, z2});
  Triple s{};
  double sum = 0.0;
  for (int i = 0; i < kNumSlices; ++i) {
    s[i] = std::max(0.0, z[i] - zp);
    sum += s[i];
  }
  if (sum < options_.theta || spread <= options_.theta) return kNoSignalDepth;
  for (auto& v : s) v /= sum;

  double best = std::numeric_limits<double>::infinity();
  double best_r = kNoSignalDepth;
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    const auto& n = normalized_[i];
    if (n[0] + n[1] + n[2] == 0.0) continue;
    double d = 0.0;
    for (int k = 0; k < kNumSlices; ++k) {
      const double e = s[k] - n[k];
      d += e * e;
    }
    if (d < best) {
      best = d;
      best_r = ranges_[i];
    }
  }
  return best_r;
}

ImageD approx_depth_ratio(const GatedFrame& frame, const ProfileLookup& lookup,
                          int threads) {
  frame.validate();
  ImageD out(frame.width(), frame.height());
  parallel_rows(frame.height(), threads, [&](int y) {
    for (int x = 0; x < frame.width(); ++x) {
      out(x, y) = lookup.ratio_depth(frame.slices[0](x, y), frame.slices[1](x, y),
                                     frame.slices[2](x, y), frame.passive(x, y));
    }
  });
  return out;
}

int active_gate_count(const ProfileLookup& lookup, double r) {
  int n = 0;
  for (const auto& p : lookup.profiles()) {
    n += p.eval(r, lookup.options().mode) > lookup.options().active_threshold;
  }
  return n;
}

PixelEstimate solve_pixel(double z0, double z1, double z2, double zp,
                          const ProfileLookup& lookup,
                          std::optional<double> init) {
  const SolverOptions& opt = lookup.options();
  const Observation obs{{z0, z1, z2}, zp};
  PixelEstimate est;

  const double zmax = std::max({z0, z1, z2});
  const double spread = zmax - std::min({z0, z1, z2});
  if (spread <= opt.theta) {
    // No modulation: depth is unobservable.
    est.depth_r = opt.r_max;
    est.ambient_l = std::clamp((z0 + z1 + z2 + opt.passive_weight * zp) /
                                   (kNumSlices + opt.passive_weight),
                               0.0, 1.0);
    est.residual = 0.0;
    for (double z : obs.z) est.residual += (z - est.ambient_l) * (z - est.ambient_l);
    return est;
  }

  const PixelSolver solver(obs, lookup);
  std::vector<double> starts;
  const double first = init.value_or(lookup.ratio_depth(z0, z1, z2, zp));
  if (std::isfinite(first)) starts.push_back(first);
  const double grid = solver.grid_start();
  if (starts.empty() || std::abs(grid - starts.front()) > 1e-9) {
    starts.push_back(grid);
  }

  Candidate best;
  best.fit.objective = std::numeric_limits<double>::infinity();
  for (double s : starts) {
    const Candidate c = solver.refine(s);
    const bool better = c.fit.objective < best.fit.objective ||
                        (c.fit.objective == best.fit.objective && c.r < best.r);
    if (better) best = c;
  }

  est.depth_r = best.r;
  est.albedo_a = std::min(best.fit.a, 1.0);
  est.albedo_clamped = best.fit.a > 1.0;
  est.ambient_l = best.fit.l;
  est.residual = best.fit.slice_residual;
  est.iterations = best.iterations;
  est.converged = zmax < opt.gamma && est.residual <= opt.max_residual &&
                  active_gate_count(lookup, best.r) >= 2;
  return est;
}

DepthMap solve_frame(const GatedFrame& frame, const ProfileLookup& lookup,
                     const MaskStack* masks, int threads, bool keep_estimates) {
  frame.validate();
  const int w = frame.width();
  const int h = frame.height();
  if (masks != nullptr) require_same_shape(frame.passive, masks->b, "solve_frame");

  DepthMap out;
  out.depth = ImageD(w, h, 0.0);
  out.validity = Mask(w, h);
  std::vector<PixelEstimate> estimates(static_cast<std::size_t>(w) * h);
  parallel_rows(h, threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (masks != nullptr && !masks->b(x, y)) continue;
      const PixelEstimate e =
          solve_pixel(frame.slices[0](x, y), frame.slices[1](x, y),
                      frame.slices[2](x, y), frame.passive(x, y), lookup);
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      estimates[idx] = e;
      out.depth(x, y) = e.depth_r;
      out.validity(x, y) = e.converged ? 1 : 0;
    }
  });
  if (keep_estimates) out.estimates = std::move(estimates);
  return out;
}

namespace {
ImageD estimate_image(const DepthMap& map, double PixelEstimate::*field) {
  if (map.estimates.size() != map.depth.size()) {
    throw std::invalid_argument("depth map carries no per-pixel estimates");
  }
  ImageD out(map.width(), map.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = map.estimates[i].*field;
  return out;
}
}  // namespace

ImageD estimate_albedo(const DepthMap& map) {
  return estimate_image(map, &PixelEstimate::albedo_a);
}

ImageD estimate_ambient(const DepthMap& map) {
  return estimate_image(map, &PixelEstimate::ambient_l);
}

}  // namespace gatedsim
