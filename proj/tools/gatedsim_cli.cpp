// gatedsim: command-line driver.
//
//   render     scene config -> frame_NNNN_{slice0,1,2,passive}.pgm,
//              frame_NNNN_depth.pfm, poses.txt
//   calibrate  sample table -> profile config
//   decode     frame -> depth / albedo / ambient PFMs, validity PGM
//   masks      frame (+ depth) -> mask PGMs and a JSON report
//   warp       neighbour image + depth + poses -> image seen from frame t
//   loss       cyclic or temporal loss report (JSON), optional gradient PFM
//   eval       depth + ground truth -> metrics JSON / CSV
//
// Exit codes: 0 ok, 2 configuration / usage, 3 input or output, 4 numerical.
// Errors are printed to stderr as {"error": ..., "kind": ...}.

#include "gatedsim/config.hpp"
#include "gatedsim/eval.hpp"
#include "gatedsim/formation.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/inversion.hpp"
#include "gatedsim/io.hpp"
#include "gatedsim/losses.hpp"
#include "gatedsim/masks.hpp"
#include "gatedsim/rip.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gatedsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
};

std::optional<ConfigDocument> load_config(const Common& c) {
  if (c.config.empty()) return std::nullopt;
  auto doc = ConfigDocument::load(c.config);
  doc.require_only({"profiles", "intrinsics", "noise", "thresholds", "scene", "sequence"});
  return doc;
}

ProfileSet profiles_from(const std::optional<ConfigDocument>& doc) {
  if (doc && doc->has("profiles")) return doc->profiles();
  return default_profiles();
}

MaskThresholds thresholds_from(const std::optional<ConfigDocument>& doc) {
  return doc ? doc->thresholds() : MaskThresholds{};
}

Intrinsics intrinsics_from(const std::optional<ConfigDocument>& doc, int w, int h) {
  if (doc && doc->has("intrinsics")) {
    auto k = doc->intrinsics();
    if (k.width != w || k.height != h) {
      throw DimensionError("intrinsics size differs from the image size");
    }
    return k;
  }
  return Intrinsics::centered(w, h);
}

void write_json(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

json metrics_json(const MetricsReport& m) {
  return json{{"rmse", m.rmse},
              {"mae", m.mae},
              {"ard", m.ard},
              {"delta1", m.delta1},
              {"delta2", m.delta2},
              {"delta3", m.delta3},
              {"completeness", m.completeness},
              {"n_points", m.n_points},
              {"n_in_range", m.n_in_range},
              {"range", {m.range.lo, m.range.hi}},
              {"empty", m.empty}};
}

json loss_json(const LossReport& r) {
  json j{{"total", r.total},
         {"per_slice", {r.per_slice[0], r.per_slice[1], r.per_slice[2]}},
         {"ambient_term", r.ambient_term},
         {"valid_pixel_count", r.valid_pixel_count}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

std::string frame_prefix(const fs::path& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d", index);
  return (dir / buf).string();
}

GatedFrame load_frame(const std::string& prefix, const std::vector<std::string>& files) {
  if (!files.empty()) {
    if (files.size() != 4) throw std::invalid_argument("--frame-files takes 4 paths");
    return read_frame(files[0], files[1], files[2], files[3]);
  }
  if (prefix.empty()) throw std::invalid_argument("one of --frame or --frame-files is required");
  return read_frame(prefix);
}

void add_frame_options(CLI::App* app, std::string& prefix, std::vector<std::string>& files) {
  app->add_option("--frame", prefix,
                  "Frame prefix; reads <prefix>_slice{0,1,2}.pgm and <prefix>_passive.pgm");
  app->add_option("--frame-files", files, "slice0 slice1 slice2 passive PGM paths")
      ->expected(4);
}

Mask optional_mask(const std::string& path, int w, int h, bool fill) {
  if (path.empty()) return Mask(w, h, fill ? 1 : 0);
  Mask m = read_mask_pgm(path);
  if (m.width() != w || m.height() != h) throw DimensionError("mask size differs from the frame");
  return m;
}

ImageD require_pfm(const std::string& path, int w, int h, const char* what) {
  ImageD img = read_pfm(path);
  if (img.width() != w || img.height() != h) {
    throw DimensionError(std::string(what) + " size differs from the frame");
  }
  return img;
}

Mask finite_positive(const ImageD& depth) {
  Mask m(depth.width(), depth.height());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    m[i] = std::isfinite(depth[i]) && depth[i] > 0.0;
  }
  return m;
}

// ---------------------------------------------------------------- render

int run_render(const Common& c, const std::string& out_dir) {
  if (c.config.empty()) throw std::invalid_argument("render needs --config");
  auto doc = load_config(c);
  SceneConfig sc = doc->scene();
  const ProfileSet profiles = profiles_from(doc);
  NoiseModel noise = sc.noise;
  if (c.seed_given) noise.seed = c.seed;

  fs::create_directories(out_dir);
  PoseSequence poses;
  for (int f = 0; f < sc.sequence.frames; ++f) {
    SceneParams params = sc.params;
    params.camera_to_world = sc.params.camera_to_world;
    params.camera_to_world.translation += sc.sequence.translation * static_cast<double>(f);
    const SceneModel scene = make_test_scene(sc.kind, sc.width, sc.height, params);
    GatedFrame frame = render_noiseless(scene, profiles, ProfileMode::kChebyshev, c.threads);
    frame.frame_id = f;
    frame.timestamp = f * sc.sequence.frame_interval;
    if (!noise.is_noiseless()) frame = apply_noise(frame, noise, c.threads);
    const std::string prefix = frame_prefix(out_dir, f);
    write_frame(prefix, frame);
    write_pfm(prefix + "_depth.pfm", scene.depth);
    poses[f] = params.camera_to_world;
  }
  write_poses(fs::path(out_dir) / "poses.txt", poses);
  write_text(fs::path(out_dir) / "profiles.yaml", profiles_to_text(profiles) +
                                                      intrinsics_to_text(sc.intrinsics) +
                                                      noise_to_text(noise));
  json j{{"frames", sc.sequence.frames},
         {"scene", std::string(scene_kind_name(sc.kind))},
         {"width", sc.width},
         {"height", sc.height},
         {"seed", noise.seed},
         {"noiseless", noise.is_noiseless()}};
  write_json(j, "-");
  return 0;
}

// ------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string samples;
  std::string out;
  int slice = 1;
  std::vector<double> domain;
};

int run_calibrate(const Common& c, const CalibrateArgs& a) {
  auto doc = load_config(c);
  ProfileSet profiles = profiles_from(doc);
  json j;
  if (!a.samples.empty()) {
    if (a.slice < 0 || a.slice >= kNumSlices) throw std::invalid_argument("--slice must be 0, 1 or 2");
    const auto samples = read_samples(a.samples);
    if (samples.empty()) throw CalibrationError("sample table is empty");
    RangeInterval dom;
    if (!a.domain.empty()) {
      dom = {a.domain[0], a.domain[1]};
    } else {
      auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                          [](const auto& p, const auto& q) { return p.r < q.r; });
      dom = {lo->r, hi->r};
    }
    const auto coeffs = fit_chebyshev(samples, dom);
    auto& target = profiles[a.slice];
    target = RangeIntensityProfile(a.slice, target.timing(), ChebyshevSeries(coeffs, dom));
    double sq = 0.0, worst = 0.0;
    for (const auto& s : samples) {
      const double e = target.series().value(s.r) - s.intensity;
      sq += e * e;
      worst = std::max(worst, std::abs(e));
    }
    j = {{"slice", a.slice},
         {"samples", samples.size()},
         {"domain", {dom.lo, dom.hi}},
         {"coefficients", std::vector<double>(coeffs.begin(), coeffs.end())},
         {"rms_residual", std::sqrt(sq / samples.size())},
         {"max_residual", worst}};
  } else {
    j = {{"slice", "all"}, {"source", "analytic"}};
  }
  write_text(a.out, profiles_to_text(profiles));
  write_json(j, "-");
  return 0;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
  std::string frame;
  std::vector<std::string> files;
  std::string mask;
  std::string out_prefix;
  std::string summary;
  double min_converged = 0.0;
};

int run_decode(const Common& c, const DecodeArgs& a) {
  auto doc = load_config(c);
  const ProfileSet profiles = profiles_from(doc);
  const GatedFrame frame = load_frame(a.frame, a.files);
  const int w = frame.width(), h = frame.height();

  const ProfileLookup lookup(profiles);
  std::optional<MaskStack> stack;
  if (!a.mask.empty()) {
    stack.emplace();
    stack->b = optional_mask(a.mask, w, h, true);
  }
  const DepthMap map = solve_frame(frame, lookup, stack ? &*stack : nullptr, c.threads, true);

  write_pfm(a.out_prefix + "_depth.pfm", map.depth);
  write_pfm(a.out_prefix + "_albedo.pfm", estimate_albedo(map));
  write_pfm(a.out_prefix + "_ambient.pfm", estimate_ambient(map));
  write_mask_pgm(a.out_prefix + "_validity.pgm", map.validity);

  std::size_t attempted = 0, converged = 0, clamped = 0;
  std::vector<double> residuals;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (stack && !stack->b(x, y)) continue;
      const auto& e = map.estimates[static_cast<std::size_t>(y) * w + x];
      ++attempted;
      converged += e.converged;
      clamped += e.albedo_clamped;
      if (e.converged) residuals.push_back(e.residual);
    }
  }
  const double rate = attempted ? static_cast<double>(converged) / attempted : 0.0;
  json j{{"pixels", static_cast<std::size_t>(w) * h},
         {"attempted", attempted},
         {"converged", converged},
         {"convergence_rate", rate},
         {"median_residual", residuals.empty() ? json(nullptr) : json(median(residuals))},
         {"albedo_clamped", clamped},
         {"valid", count_true(map.validity)}};
  write_json(j, a.summary);
  if (rate < a.min_converged) {
    throw NumericalFailure("convergence rate " + format_double(rate) + " below " +
                           format_double(a.min_converged));
  }
  return 0;
}

// ----------------------------------------------------------------- masks

struct MasksArgs {
  std::string frame;
  std::vector<std::string> files;
  std::string depth;
  std::string validity;
  std::string out_dir;
  std::string report;
};

int run_masks(const Common& c, const MasksArgs& a) {
  auto doc = load_config(c);
  const ProfileSet profiles = profiles_from(doc);
  const MaskThresholds thr = thresholds_from(doc);
  const GatedFrame frame = load_frame(a.frame, a.files);
  const int w = frame.width(), h = frame.height();
  const Intrinsics k = intrinsics_from(doc, w, h);

  ImageD depth;
  std::string depth_source;
  if (a.depth.empty()) {
    SolverOptions so;
    so.theta = thr.theta;
    depth = approx_depth_ratio(frame, ProfileLookup(profiles, so), c.threads);
    depth_source = "ratio";
  } else {
    depth = require_pfm(a.depth, w, h, "depth");
    depth_source = "file";
  }
  Mask validity = finite_positive(depth);
  if (!a.validity.empty()) {
    const Mask given = optional_mask(a.validity, w, h, true);
    for (std::size_t i = 0; i < validity.size(); ++i) validity[i] = validity[i] && given[i];
  }

  const MaskStack s = build_mask_stack(frame, depth, &validity, k, profiles, thr);
  fs::create_directories(a.out_dir);
  const std::pair<const char*, const Mask*> named[] = {
      {"D", &s.D}, {"M", &s.M},   {"b_prime", &s.b_prime}, {"E", &s.E}, {"b", &s.b},
      {"S1", &s.S1}, {"S2", &s.S2}, {"m", &s.m},             {"v", &s.v}};
  json counts = json::object();
  for (const auto& [name, mask] : named) {
    write_mask_pgm(fs::path(a.out_dir) / (std::string(name) + ".pgm"), *mask);
    counts[name] = count_true(*mask);
  }
  json j{{"width", w},
         {"height", h},
         {"depth_source", depth_source},
         {"counts", counts},
         {"s0", num(s.s0)},
         {"s1", num(s.s1)},
         {"r_bar", num(s.r_bar)},
         {"thresholds",
          {{"theta", thr.theta}, {"gamma", thr.gamma}, {"c", thr.c_ratio},
           {"plane_height", thr.plane_height}}}};
  if (!s.diagnostic.empty()) j["diagnostic"] = s.diagnostic;
  write_json(j, a.report);
  return 0;
}

// ------------------------------------------------------------------ warp

struct WarpArgs {
  std::string image;
  std::string depth;
  std::string poses;
  long long target = 0;
  long long source = 1;
  std::string out;
  std::string out_valid;
};

RigidPose pose_between(const PoseSequence& poses, long long target, long long source) {
  const auto t = poses.find(target);
  const auto s = poses.find(source);
  if (t == poses.end() || s == poses.end()) {
    throw std::invalid_argument("frame id not present in the pose file");
  }
  return relative_pose(t->second, s->second);
}

int run_warp(const Common& c, const WarpArgs& a) {
  auto doc = load_config(c);
  const ImageD image = read_pgm(a.image);
  const int w = image.width(), h = image.height();
  const Intrinsics k = intrinsics_from(doc, w, h);
  const ImageD range = require_pfm(a.depth, w, h, "depth");
  const RigidPose pose = pose_between(read_poses(a.poses), a.target, a.source);

  const Mask valid = finite_positive(range);
  const WarpField field =
      warp_coordinates(k, pose, range_to_zdepth(k, range), &valid, c.threads);
  SampledImage sampled = sample_bilinear(image, field);
  for (std::size_t i = 0; i < sampled.values.size(); ++i) {
    if (!sampled.valid[i]) sampled.values[i] = 0.0;
  }
  write_pgm16(a.out, sampled.values);
  if (!a.out_valid.empty()) write_mask_pgm(a.out_valid, sampled.valid);
  write_json(json{{"valid", count_true(sampled.valid)},
                  {"pixels", static_cast<std::size_t>(w) * h}},
             "-");
  return 0;
}

// ------------------------------------------------------------------ loss

struct LossArgs {
  std::string kind = "cyclic";
  std::string frame;
  std::vector<std::string> files;
  std::string estimate;
  std::string mask;
  std::string literal;
  std::vector<std::string> neighbors;
  std::vector<long long> ids;
  std::string poses;
  std::string gradient;
  std::string report;
};

int run_loss(const Common& c, const LossArgs& a) {
  auto doc = load_config(c);
  const ProfileSet profiles = profiles_from(doc);
  const GatedFrame frame = load_frame(a.frame, a.files);
  const int w = frame.width(), h = frame.height();
  if (a.estimate.empty()) throw std::invalid_argument("loss needs --estimate");
  const ImageD depth = require_pfm(a.estimate + "_depth.pfm", w, h, "depth");
  const MaskMode mode = a.literal == "literal" ? MaskMode::kLiteral : MaskMode::kRestricted;
  if (!a.literal.empty() && a.literal != "literal" && a.literal != "restricted") {
    throw std::invalid_argument("--mask-mode must be restricted or literal");
  }

  json j;
  if (a.kind == "cyclic") {
    SceneEstimate est{depth, require_pfm(a.estimate + "_albedo.pfm", w, h, "albedo"),
                      require_pfm(a.estimate + "_ambient.pfm", w, h, "ambient")};
    for (std::size_t i = 0; i < est.depth.size(); ++i) {
      if (!std::isfinite(est.depth[i])) est.depth[i] = 0.0;
    }
    std::optional<Mask> b;
    if (!a.mask.empty()) b = optional_mask(a.mask, w, h, true);
    CyclicLossOptions opts;
    opts.mask_mode = mode;
    opts.with_gradient = !a.gradient.empty();
    const LossReport r = cyclic_loss(frame, est, profiles, b ? &*b : nullptr, opts);
    j = loss_json(r);
    j["kind"] = "cyclic";
    if (r.gradient) write_pfm(a.gradient, *r.gradient);
  } else if (a.kind == "temporal") {
    if (a.neighbors.size() != 2 || a.ids.size() != 3) {
      throw std::invalid_argument("temporal loss needs two --neighbor prefixes and --ids t n1 n2");
    }
    const PoseSequence poses = read_poses(a.poses);
    const GatedFrame n0 = read_frame(a.neighbors[0]);
    const GatedFrame n1 = read_frame(a.neighbors[1]);
    std::array<TemporalNeighbor, 2> nb{
        TemporalNeighbor{&n0, pose_between(poses, a.ids[0], a.ids[1])},
        TemporalNeighbor{&n1, pose_between(poses, a.ids[0], a.ids[2])}};
    std::optional<Mask> v;
    if (!a.mask.empty()) v = optional_mask(a.mask, w, h, true);
    const TemporalLossResult r = temporal_loss(frame, nb, depth, v ? &*v : nullptr,
                                               intrinsics_from(doc, w, h), {}, mode);
    j = loss_json(r.report);
    j["kind"] = "temporal";
  } else {
    throw std::invalid_argument("--kind must be cyclic or temporal");
  }
  write_json(j, a.report);
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string depth;
  std::string validity;
  std::string gt_points;
  std::string gt_dense;
  std::string report;
  std::string csv;
  bool binned = true;
  std::vector<double> range{3.0, 80.0};
};

int run_eval(const Common&, const EvalArgs& a) {
  const ImageD pred = read_pfm(a.depth);
  const int w = pred.width(), h = pred.height();
  Mask valid = finite_positive(pred);
  if (!a.validity.empty()) {
    const Mask given = optional_mask(a.validity, w, h, true);
    for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = valid[i] && given[i];
  }
  std::vector<GroundTruthPoint> gt;
  if (!a.gt_points.empty()) {
    gt = read_points(a.gt_points);
  } else if (!a.gt_dense.empty()) {
    gt = points_from_dense(require_pfm(a.gt_dense, w, h, "ground truth"));
  } else {
    throw std::invalid_argument("eval needs --gt-points or --gt-dense");
  }
  EvalOptions opt;
  opt.range = {a.range[0], a.range[1]};
  if (!(opt.range.lo < opt.range.hi)) throw std::invalid_argument("--range needs lo < hi");

  const MetricsReport overall = compute_metrics(pred, valid, gt, opt);
  json j{{"overall", metrics_json(overall)}};
  std::optional<BinnedReport> binned;
  if (a.binned) {
    std::vector<double> edges;
    for (double e = opt.range.lo; e < opt.range.hi - 1e-9; e += 7.0) edges.push_back(e);
    edges.push_back(opt.range.hi);
    if (opt.range.lo == 3.0 && opt.range.hi == 80.0) edges = default_bin_edges();
    binned = binned_metrics(pred, valid, gt, edges, opt);
    json bins = json::array();
    for (std::size_t i = 0; i < binned->per_bin.size(); ++i) {
      json b = metrics_json(binned->per_bin[i]);
      b["bin"] = {edges[i], edges[i + 1]};
      bins.push_back(b);
    }
    j["bins"] = bins;
    j["binned_aggregate"] = metrics_json(binned->aggregate);
  }
  write_json(j, a.report);

  if (!a.csv.empty()) {
    std::ostringstream csv;
    csv << "bin_lo,bin_hi,rmse,mae,ard,delta1,delta2,delta3,completeness,n_points\n";
    auto row = [&](double lo, double hi, const MetricsReport& m) {
      csv << format_double(lo) << ',' << format_double(hi) << ',' << format_double(m.rmse)
          << ',' << format_double(m.mae) << ',' << format_double(m.ard) << ','
          << format_double(m.delta1) << ',' << format_double(m.delta2) << ','
          << format_double(m.delta3) << ',' << format_double(m.completeness) << ','
          << m.n_points << '\n';
    };
    row(opt.range.lo, opt.range.hi, overall);
    if (binned) {
      for (std::size_t i = 0; i < binned->per_bin.size(); ++i) {
        row(binned->bin_edges[i], binned->bin_edges[i + 1], binned->per_bin[i]);
      }
    }
    write_text(a.csv, csv.str());
  }
  return 0;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", message}, {"kind", kind}, {"exit_code", code}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated imaging simulation and inversion toolkit"};
  app.require_subcommand(1);
  app.allow_extras(false);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Config document (YAML)");
    sub->add_option("--seed", common.seed, "Noise seed; overrides the config");
    sub->add_option("--threads", common.threads, "Worker threads")
        ->check(CLI::PositiveNumber);
  };

  std::string render_out;
  auto* render = app.add_subcommand("render", "Render a scene (sequence) to PGM/PFM files");
  add_common(render);
  render->add_option("--out", render_out, "Output directory")->required();

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Fit a Chebyshev profile to samples");
  add_common(calibrate);
  calibrate->add_option("--samples", cal.samples, "Sample table: 'r intensity' per line");
  calibrate->add_option("--slice", cal.slice, "Slice the samples belong to");
  calibrate->add_option("--domain", cal.domain, "Fit domain lo hi (m)")->expected(2);
  calibrate->add_option("--out", cal.out, "Output profile config")->required();

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Recover depth, albedo and ambient");
  add_common(decode);
  add_frame_options(decode, dec.frame, dec.files);
  decode->add_option("--mask", dec.mask, "Final mask b (PGM); only these pixels are solved");
  decode->add_option("--out", dec.out_prefix, "Output prefix")->required();
  decode->add_option("--summary", dec.summary, "Summary JSON path (default stdout)");
  decode->add_option("--min-converged", dec.min_converged,
                     "Exit 4 if the converged fraction is below this")
      ->check(CLI::Range(0.0, 1.0));

  MasksArgs msk;
  auto* masks = app.add_subcommand("masks", "Compute the validity mask stack");
  add_common(masks);
  add_frame_options(masks, msk.frame, msk.files);
  masks->add_option("--depth", msk.depth, "Range PFM (default: ratio-based depth)");
  masks->add_option("--validity", msk.validity, "Depth validity PGM");
  masks->add_option("--out", msk.out_dir, "Output directory")->required();
  masks->add_option("--report", msk.report, "Report JSON path (default stdout)");

  WarpArgs wa;
  auto* warp = app.add_subcommand("warp", "Resample a neighbour image into frame t");
  add_common(warp);
  warp->add_option("--image", wa.image, "Neighbour image (PGM)")->required();
  warp->add_option("--depth", wa.depth, "Range PFM of frame t")->required();
  warp->add_option("--poses", wa.poses, "Pose file")->required();
  warp->add_option("--target", wa.target, "Frame id t");
  warp->add_option("--source", wa.source, "Frame id of the neighbour");
  warp->add_option("--out", wa.out, "Output PGM")->required();
  warp->add_option("--out-valid", wa.out_valid, "Output validity PGM");

  LossArgs la;
  auto* loss = app.add_subcommand("loss", "Cyclic or temporal consistency loss");
  add_common(loss);
  add_frame_options(loss, la.frame, la.files);
  loss->add_option("--kind", la.kind, "cyclic | temporal");
  loss->add_option("--estimate", la.estimate,
                   "Estimate prefix (<p>_depth.pfm, <p>_albedo.pfm, <p>_ambient.pfm)");
  loss->add_option("--mask", la.mask, "Mask b (cyclic) or v (temporal)");
  loss->add_option("--mask-mode", la.literal, "restricted | literal");
  loss->add_option("--neighbor", la.neighbors, "Neighbour frame prefixes (two)");
  loss->add_option("--ids", la.ids, "Frame ids: t, first neighbour, second neighbour");
  loss->add_option("--poses", la.poses, "Pose file (temporal)");
  loss->add_option("--gradient", la.gradient, "Write d loss / d depth as PFM (cyclic)");
  loss->add_option("--report", la.report, "Report JSON path (default stdout)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Depth metrics against ground truth");
  add_common(eval);
  eval->add_option("--depth", ea.depth, "Predicted range PFM")->required();
  eval->add_option("--validity", ea.validity, "Prediction validity PGM");
  eval->add_option("--gt-points", ea.gt_points, "Ground truth: 'x y depth' per line");
  eval->add_option("--gt-dense", ea.gt_dense, "Ground truth PFM (<= 0 or non-finite: missing)");
  eval->add_option("--range", ea.range, "Evaluation range lo hi (m)")->expected(2);
  eval->add_flag("!--no-bins", ea.binned, "Skip the 7 m binned report");
  eval->add_option("--report", ea.report, "Report JSON path (default stdout)");
  eval->add_option("--csv", ea.csv, "CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "usage", e.what());
  }
  for (auto* sub : {render, calibrate, decode, masks, warp, loss, eval}) {
    if (sub->count_all() > 0 && sub->count("--seed") > 0) common.seed_given = true;
  }

  try {
    if (*render) return run_render(common, render_out);
    if (*calibrate) return run_calibrate(common, cal);
    if (*decode) return run_decode(common, dec);
    if (*masks) return run_masks(common, msk);
    if (*warp) return run_warp(common, wa);
    if (*loss) return run_loss(common, la);
    if (*eval) return run_eval(common, ea);
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const IoError& e) {
    return fail(kExitIo, "io", e.what());
  } catch (const DimensionError& e) {
    return fail(kExitIo, "dimension", e.what());
  } catch (const CalibrationError& e) {
    return fail(kExitNumerical, "calibration", e.what());
  } catch (const NumericalFailure& e) {
    return fail(kExitNumerical, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kExitConfig, "argument", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kExitIo, "io", e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumerical, "internal", e.what());
  }
  return 0;
}
