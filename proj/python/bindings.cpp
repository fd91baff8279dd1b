#include "gatedsim/eval.hpp"
#include "gatedsim/formation.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/inversion.hpp"
#include "gatedsim/losses.hpp"
#include "gatedsim/masks.hpp"
#include "gatedsim/rip.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace gatedsim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

ImageD to_image(const Array& a, const char* name) {
  if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + ": expected a 2-D array");
  ImageD img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy_n(a.data(), img.size(), img.data());
  return img;
}

Mask to_mask(const BoolArray& a, const char* name) {
  if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + ": expected a 2-D array");
  Mask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  const bool* src = a.data();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = src[i] ? 1 : 0;
  return m;
}

std::optional<Mask> to_optional_mask(const std::optional<BoolArray>& a, const char* name) {
  if (!a) return std::nullopt;
  return to_mask(*a, name);
}

py::array_t<double> to_array(const ImageD& img) {
  py::array_t<double> out({img.height(), img.width()});
  std::copy_n(img.data(), img.size(), out.mutable_data());
  return out;
}

py::array_t<bool> to_array(const Mask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  bool* dst = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = m[i] != 0;
  return out;
}

// Slices are passed as a (3, h, w) stack plus a separate passive image.
GatedFrame to_frame(const Array& slices, const Array& passive) {
  if (slices.ndim() != 3 || slices.shape(0) != kNumSlices) {
    throw std::invalid_argument("slices: expected shape (3, height, width)");
  }
  GatedFrame f;
  f.passive = to_image(passive, "passive");
  const auto h = slices.shape(1), w = slices.shape(2);
  if (h != f.passive.height() || w != f.passive.width()) {
    throw DimensionError("slices and passive differ in shape");
  }
  for (int i = 0; i < kNumSlices; ++i) {
    f.slices[i] = ImageD(static_cast<int>(w), static_cast<int>(h));
    std::copy_n(slices.data() + i * h * w, h * w, f.slices[i].data());
  }
  return f;
}

py::array_t<double> slices_to_array(const std::array<ImageD, kNumSlices>& s) {
  const int h = s[0].height(), w = s[0].width();
  py::array_t<double> out({kNumSlices, h, w});
  for (int i = 0; i < kNumSlices; ++i) {
    std::copy_n(s[i].data(), s[i].size(), out.mutable_data() + static_cast<std::size_t>(i) * h * w);
  }
  return out;
}

py::dict frame_dict(const GatedFrame& f) {
  py::dict d;
  d["slices"] = slices_to_array(f.slices);
  d["passive"] = to_array(f.passive);
  return d;
}

SceneKind scene_kind(const std::string& name) {
  const auto k = parse_scene_kind(name);
  if (!k) throw std::invalid_argument("unknown scene kind: " + name);
  return *k;
}

MaskMode mask_mode(const std::string& s) {
  if (s == "restricted") return MaskMode::kRestricted;
  if (s == "literal") return MaskMode::kLiteral;
  throw std::invalid_argument("mask_mode must be 'restricted' or 'literal'");
}

RigidPose pose_from(const Array& m) {
  if (m.ndim() != 2 || m.shape(0) != 4 || m.shape(1) != 4) {
    throw std::invalid_argument("pose: expected a 4x4 matrix");
  }
  Eigen::Matrix4d mat;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) mat(r, c) = m.at(r, c);
  return RigidPose::from_matrix(mat);
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["rmse"] = m.rmse;
  d["mae"] = m.mae;
  d["ard"] = m.ard;
  d["delta1"] = m.delta1;
  d["delta2"] = m.delta2;
  d["delta3"] = m.delta3;
  d["completeness"] = m.completeness;
  d["n_points"] = m.n_points;
  d["n_in_range"] = m.n_in_range;
  d["empty"] = m.empty;
  return d;
}

}  // namespace

PYBIND11_MODULE(_gatedsim, m) {
  m.doc() = "Gated imaging simulation, inversion, masks, losses and metrics";

  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_RuntimeError);

  py::class_<RangeIntensityProfile>(m, "Profile")
      .def_property_readonly("slice_index", &RangeIntensityProfile::slice_index)
      .def_property_readonly("visible_range", [](const RangeIntensityProfile& p) {
        return py::make_tuple(p.visible_range().lo, p.visible_range().hi);
      })
      .def(
          "__call__",
          [](const RangeIntensityProfile& p, const Array& r, bool analytic) {
            const auto mode = analytic ? ProfileMode::kAnalytic : ProfileMode::kChebyshev;
            py::array_t<double> out(r.request().shape);
            for (py::ssize_t i = 0; i < r.size(); ++i) out.mutable_data()[i] = p.eval(r.data()[i], mode);
            return out;
          },
          py::arg("r"), py::arg("analytic") = false,
          "C_i(r) elementwise; Chebyshev model unless analytic");

  m.def("default_profiles", [] {
    const auto p = default_profiles();
    return py::make_tuple(p[0], p[1], p[2]);
  });

  m.def(
      "make_scene",
      [](const std::string& kind, int width, int height, py::kwargs kw) {
        SceneParams sp;
        for (auto [key, value] : kw) {
          const auto k = key.cast<std::string>();
          const double v = value.cast<double>();
          if (k == "wall_distance") sp.wall_distance = v;
          else if (k == "ramp_near") sp.ramp_near = v;
          else if (k == "ramp_far") sp.ramp_far = v;
          else if (k == "albedo") sp.albedo = v;
          else if (k == "albedo_spread") sp.albedo_spread = v;
          else if (k == "ambient") sp.ambient = v;
          else if (k == "ambient_spread") sp.ambient_spread = v;
          else if (k == "ambient_gradient") sp.ambient_gradient = v;
          else if (k == "camera_height") sp.camera_height = v;
          else if (k == "retro_distance") sp.retro_distance = v;
          else if (k == "retro_albedo") sp.retro_albedo = v;
          else if (k == "retro_ambient") sp.retro_ambient = v;
          else if (k == "stripe_albedo") sp.stripe_albedo = v;
          else throw std::invalid_argument("unknown scene parameter: " + k);
        }
        const auto s = make_test_scene(scene_kind(kind), width, height, sp);
        py::dict d;
        d["depth"] = to_array(s.depth);
        d["albedo"] = to_array(s.albedo);
        d["ambient"] = to_array(s.ambient);
        return d;
      },
      py::arg("kind"), py::arg("width"), py::arg("height"),
      "Synthetic scene as range, albedo and ambient arrays (height, width)");

  m.def(
      "render",
      [](const Array& depth, const Array& albedo, const Array& ambient, double sigma,
         double poisson_scale, std::uint64_t seed, bool noise, int threads) {
        SceneModel s;
        s.depth = to_image(depth, "depth");
        s.albedo = to_image(albedo, "albedo");
        s.ambient = to_image(ambient, "ambient");
        s.width = s.depth.width();
        s.height = s.depth.height();
        s.attenuation_beta = ImageD(s.width, s.height, 1.0);
        const auto profiles = default_profiles();
        GatedFrame f;
        {
          py::gil_scoped_release release;
          f = render_noiseless(s, profiles, ProfileMode::kChebyshev, threads);
          if (noise) f = apply_noise(f, NoiseModel{sigma, poisson_scale, seed}, threads);
        }
        return frame_dict(f);
      },
      py::arg("depth"), py::arg("albedo"), py::arg("ambient"), py::arg("sigma") = 0.002,
      py::arg("poisson_scale") = 5000.0, py::arg("seed") = 0, py::arg("noise") = false,
      py::arg("threads") = 1);

  m.def(
      "ratio_depth",
      [](const Array& slices, const Array& passive, int threads) {
        const ProfileLookup lookup(default_profiles());
        return to_array(approx_depth_ratio(to_frame(slices, passive), lookup, threads));
      },
      py::arg("slices"), py::arg("passive"), py::arg("threads") = 1);

  m.def(
      "solve_pixel",
      [](double z0, double z1, double z2, double zp) {
        const ProfileLookup lookup(default_profiles());
        const auto e = solve_pixel(z0, z1, z2, zp, lookup);
        py::dict d;
        d["depth"] = e.depth_r;
        d["albedo"] = e.albedo_a;
        d["ambient"] = e.ambient_l;
        d["residual"] = e.residual;
        d["converged"] = e.converged;
        d["iterations"] = e.iterations;
        return d;
      },
      py::arg("z0"), py::arg("z1"), py::arg("z2"), py::arg("zp"));

  m.def(
      "solve",
      [](const Array& slices, const Array& passive, const std::optional<BoolArray>& mask,
         int threads) {
        const auto frame = to_frame(slices, passive);
        const auto b = to_optional_mask(mask, "mask");
        const ProfileLookup lookup(default_profiles());
        MaskStack stack;
        const MaskStack* sp = nullptr;
        if (b) {
          require_same_shape(frame.passive, *b, "solve mask");
          stack.b = *b;
          sp = &stack;
        }
        DepthMap map;
        {
          py::gil_scoped_release release;
          map = solve_frame(frame, lookup, sp, threads);
        }
        py::dict d;
        d["depth"] = to_array(map.depth);
        d["validity"] = to_array(map.validity);
        d["albedo"] = to_array(estimate_albedo(map));
        d["ambient"] = to_array(estimate_ambient(map));
        return d;
      },
      py::arg("slices"), py::arg("passive"), py::arg("mask") = py::none(), py::arg("threads") = 1);

  m.def(
      "masks",
      [](const Array& slices, const Array& passive, const Array& depth,
         const std::optional<BoolArray>& validity) {
        const auto frame = to_frame(slices, passive);
        const auto v = to_optional_mask(validity, "validity");
        const auto s = build_mask_stack(frame, to_image(depth, "depth"), v ? &*v : nullptr,
                                        Intrinsics::centered(frame.width(), frame.height()),
                                        default_profiles());
        py::dict d;
        d["D"] = to_array(s.D);
        d["M"] = to_array(s.M);
        d["b_prime"] = to_array(s.b_prime);
        d["E"] = to_array(s.E);
        d["b"] = to_array(s.b);
        d["S1"] = to_array(s.S1);
        d["S2"] = to_array(s.S2);
        d["m"] = to_array(s.m);
        d["v"] = to_array(s.v);
        d["s0"] = s.s0;
        d["s1"] = s.s1;
        d["r_bar"] = s.r_bar;
        return d;
      },
      py::arg("slices"), py::arg("passive"), py::arg("depth"), py::arg("validity") = py::none());

  m.def(
      "photometric_loss",
      [](const Array& z, const Array& z_hat, const std::optional<BoolArray>& mask,
         const std::string& mode) {
        const auto b = to_optional_mask(mask, "mask");
        return photometric_loss(to_image(z, "z"), to_image(z_hat, "z_hat"), b ? &*b : nullptr, {},
                                mask_mode(mode))
            .total;
      },
      py::arg("z"), py::arg("z_hat"), py::arg("mask") = py::none(),
      py::arg("mask_mode") = "restricted");

  m.def(
      "cyclic_loss",
      [](const Array& slices, const Array& passive, const Array& depth, const Array& albedo,
         const Array& ambient, const std::optional<BoolArray>& mask, const std::string& mode,
         bool gradient) {
        const auto frame = to_frame(slices, passive);
        const SceneEstimate est{to_image(depth, "depth"), to_image(albedo, "albedo"),
                                to_image(ambient, "ambient")};
        const auto b = to_optional_mask(mask, "mask");
        CyclicLossOptions opt;
        opt.mask_mode = mask_mode(mode);
        opt.with_gradient = gradient;
        const auto r = cyclic_loss(frame, est, default_profiles(), b ? &*b : nullptr, opt);
        py::dict d;
        d["total"] = r.total;
        d["per_slice"] = py::make_tuple(r.per_slice[0], r.per_slice[1], r.per_slice[2]);
        d["ambient_term"] = r.ambient_term;
        d["valid_pixel_count"] = r.valid_pixel_count;
        d["gradient"] = r.gradient ? py::object(to_array(*r.gradient)) : py::object(py::none());
        return d;
      },
      py::arg("slices"), py::arg("passive"), py::arg("depth"), py::arg("albedo"),
      py::arg("ambient"), py::arg("mask") = py::none(), py::arg("mask_mode") = "restricted",
      py::arg("gradient") = false);

  m.def(
      "warp",
      [](const Array& image, const Array& zdepth, const Array& pose) {
        const auto img = to_image(image, "image");
        const auto z = to_image(zdepth, "zdepth");
        const auto k = Intrinsics::centered(img.width(), img.height());
        const auto s = sample_bilinear(img, warp_coordinates(k, pose_from(pose), z));
        return py::make_tuple(to_array(s.values), to_array(s.valid));
      },
      py::arg("image"), py::arg("zdepth"), py::arg("pose"),
      "Samples `image` (the neighbour view) at the pixels seen from frame t");

  m.def(
      "metrics",
      [](const Array& pred, const BoolArray& validity, const Array& gt, double lo, double hi) {
        const auto p = to_image(pred, "pred");
        std::vector<GroundTruthPoint> points;
        if (gt.ndim() == 2 && gt.shape(1) == 3 && !(gt.shape(0) == p.height() && gt.shape(1) == p.width())) {
          for (py::ssize_t i = 0; i < gt.shape(0); ++i) {
            points.push_back({static_cast<int>(gt.at(i, 0)), static_cast<int>(gt.at(i, 1)), gt.at(i, 2)});
          }
        } else {
          points = points_from_dense(to_image(gt, "gt"));
        }
        EvalOptions opt;
        opt.range = {lo, hi};
        return metrics_dict(compute_metrics(p, to_mask(validity, "validity"), points, opt));
      },
      py::arg("pred"), py::arg("validity"), py::arg("gt"), py::arg("lo") = 3.0,
      py::arg("hi") = 80.0,
      "gt is either an (N, 3) array of x, y, depth or a dense depth image");
}
