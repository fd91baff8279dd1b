#include "gatedsim/config.hpp"

#include "gatedsim/io.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gatedsim {
namespace {

std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.line < 0) return "";
  return " (line " + std::to_string(m.line + 1) + ")";
}

void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in section '" + section + "'" +
                        where(kv.first));
    }
  }
}

double to_double(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsScalar()) throw ConfigError("'" + what + "' must be a number");
  const std::string& s = n.Scalar();
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  double v = 0.0;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    throw ConfigError("'" + what + "' is not a number: '" + s + "'" + where(n));
  }
  return v;
}

long long to_int(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsScalar()) throw ConfigError("'" + what + "' must be an integer");
  const std::string& s = n.Scalar();
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("'" + what + "' is not an integer: '" + s + "'" + where(n));
  }
  return v;
}

const YAML::Node required(const YAML::Node& parent, const std::string& key,
                          const std::string& section) {
  const YAML::Node n = parent[key];
  if (!n) throw ConfigError("missing key '" + key + "' in section '" + section + "'");
  return n;
}

template <std::size_t N>
std::array<double, N> to_array(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != N) {
    throw ConfigError("'" + what + "' must be a list of " + std::to_string(N) +
                      " numbers" + where(n));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = to_double(n[i], what);
  return out;
}

void assign_if(const YAML::Node& parent, const char* key, double& target) {
  if (const YAML::Node n = parent[key]) target = to_double(n, key);
}

template <typename Fn>
auto guarded(Fn fn) {
  try {
    return fn();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Intrinsics parse_intrinsics(const YAML::Node& n) {
  check_keys(n, "intrinsics", {"fx", "fy", "cx", "cy", "width", "height"});
  Intrinsics k;
  k.fx = to_double(required(n, "fx", "intrinsics"), "fx");
  k.fy = to_double(required(n, "fy", "intrinsics"), "fy");
  k.cx = to_double(required(n, "cx", "intrinsics"), "cx");
  k.cy = to_double(required(n, "cy", "intrinsics"), "cy");
  k.width = static_cast<int>(to_int(required(n, "width", "intrinsics"), "width"));
  k.height = static_cast<int>(to_int(required(n, "height", "intrinsics"), "height"));
  k.validate();
  return k;
}

NoiseModel parse_noise(const YAML::Node& n) {
  check_keys(n, "noise", {"gaussian_sigma", "poisson_scale", "seed"});
  NoiseModel m;
  assign_if(n, "gaussian_sigma", m.gaussian_sigma);
  assign_if(n, "poisson_scale", m.poisson_scale);
  if (const YAML::Node s = n["seed"]) m.seed = static_cast<std::uint64_t>(to_int(s, "seed"));
  m.validate();
  return m;
}

}  // namespace

struct ConfigDocument::Impl {
  YAML::Node root;
};

ConfigDocument::ConfigDocument() : impl_(std::make_unique<Impl>()) {}
ConfigDocument::~ConfigDocument() = default;
ConfigDocument::ConfigDocument(ConfigDocument&&) noexcept = default;
ConfigDocument& ConfigDocument::operator=(ConfigDocument&&) noexcept = default;

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  doc.impl_->root = guarded([&] { return YAML::Load(text); });
  if (doc.impl_->root.IsNull()) doc.impl_->root = YAML::Node(YAML::NodeType::Map);
  if (!doc.impl_->root.IsMap()) throw ConfigError("config document must be a mapping");
  return doc;
}

void ConfigDocument::require_only(std::initializer_list<const char*> allowed) const {
  std::set<std::string> keys;
  for (const char* k : allowed) keys.insert(k);
  guarded([&] {
    check_keys(impl_->root, "<top level>", keys);
    return 0;
  });
}

bool ConfigDocument::has(const std::string& section) const {
  return static_cast<bool>(impl_->root[section]);
}

ProfileSet ConfigDocument::profiles() const {
  return guarded([&] {
    const YAML::Node list = impl_->root["profiles"];
    if (!list || !list.IsSequence() || list.size() != kNumSlices) {
      throw ConfigError("'profiles' must list exactly 3 profiles");
    }
    ProfileSet out;
    std::set<long long> seen;
    for (const auto& p : list) {
      check_keys(p, "profiles[]", {"slice_index", "timing", "domain", "chebyshev"});
      const long long idx = to_int(required(p, "slice_index", "profiles[]"), "slice_index");
      if (idx < 0 || idx >= kNumSlices || !seen.insert(idx).second) {
        throw ConfigError("slice_index must be 0, 1, 2 and unique");
      }
      const YAML::Node t = required(p, "timing", "profiles[]");
      check_keys(t, "timing", {"delay_xi", "gate_duration", "pulse_duration",
                               "gate_edge", "peak_response"});
      GateTiming timing;
      timing.delay_xi = to_double(required(t, "delay_xi", "timing"), "delay_xi");
      timing.gate_duration = to_double(required(t, "gate_duration", "timing"), "gate_duration");
      timing.pulse_duration = to_double(required(t, "pulse_duration", "timing"), "pulse_duration");
      assign_if(t, "gate_edge", timing.gate_edge);
      assign_if(t, "peak_response", timing.peak_response);
      const auto dom = to_array<2>(required(p, "domain", "profiles[]"), "domain");
      const auto coeffs =
          to_array<kChebyshevTerms>(required(p, "chebyshev", "profiles[]"), "chebyshev");
      out[idx] = RangeIntensityProfile(static_cast<int>(idx), timing,
                                       ChebyshevSeries(coeffs, {dom[0], dom[1]}));
    }
    return out;
  });
}

Intrinsics ConfigDocument::intrinsics() const {
  return guarded([&] {
    const YAML::Node n = impl_->root["intrinsics"];
    if (!n) throw ConfigError("missing section 'intrinsics'");
    return parse_intrinsics(n);
  });
}

NoiseModel ConfigDocument::noise() const {
  return guarded([&] {
    const YAML::Node n = impl_->root["noise"];
    if (!n) return NoiseModel::noiseless();
    return parse_noise(n);
  });
}

MaskThresholds ConfigDocument::thresholds() const {
  return guarded([&] {
    MaskThresholds t;
    const YAML::Node n = impl_->root["thresholds"];
    if (!n) return t;
    check_keys(n, "thresholds", {"theta", "gamma", "c", "plane_height", "plane_normal",
                                 "plane_tolerance"});
    assign_if(n, "theta", t.theta);
    assign_if(n, "gamma", t.gamma);
    assign_if(n, "c", t.c_ratio);
    assign_if(n, "plane_height", t.plane_height);
    assign_if(n, "plane_tolerance", t.plane_tolerance);
    if (const YAML::Node pn = n["plane_normal"]) {
      const auto v = to_array<3>(pn, "plane_normal");
      t.plane_normal = {v[0], v[1], v[2]};
    }
    t.validate();
    return t;
  });
}

SceneConfig ConfigDocument::scene() const {
  return guarded([&] {
    SceneConfig cfg;
    const YAML::Node s = impl_->root["scene"];
    if (!s) throw ConfigError("missing section 'scene'");
    check_keys(s, "scene", {"kind", "width", "height", "params"});
    const auto kind_name = required(s, "kind", "scene").as<std::string>();
    const auto kind = parse_scene_kind(kind_name);
    if (!kind) throw ConfigError("unknown scene kind '" + kind_name + "'");
    cfg.kind = *kind;
    if (s["width"]) cfg.width = static_cast<int>(to_int(s["width"], "width"));
    if (s["height"]) cfg.height = static_cast<int>(to_int(s["height"], "height"));
    if (cfg.width <= 0 || cfg.height <= 0) throw ConfigError("scene size must be positive");

    if (const YAML::Node p = s["params"]) {
      check_keys(p, "scene.params",
                 {"wall_distance", "ramp_near", "ramp_far", "albedo", "albedo_spread",
                  "ambient", "ambient_spread", "ambient_gradient", "camera_height",
                  "retro_distance", "retro_albedo", "retro_ambient", "stripe_albedo"});
      auto& sp = cfg.params;
      assign_if(p, "wall_distance", sp.wall_distance);
      assign_if(p, "ramp_near", sp.ramp_near);
      assign_if(p, "ramp_far", sp.ramp_far);
      assign_if(p, "albedo", sp.albedo);
      assign_if(p, "albedo_spread", sp.albedo_spread);
      assign_if(p, "ambient", sp.ambient);
      assign_if(p, "ambient_spread", sp.ambient_spread);
      assign_if(p, "ambient_gradient", sp.ambient_gradient);
      assign_if(p, "camera_height", sp.camera_height);
      assign_if(p, "retro_distance", sp.retro_distance);
      assign_if(p, "retro_albedo", sp.retro_albedo);
      assign_if(p, "retro_ambient", sp.retro_ambient);
      assign_if(p, "stripe_albedo", sp.stripe_albedo);
    }
    cfg.intrinsics = impl_->root["intrinsics"]
                         ? parse_intrinsics(impl_->root["intrinsics"])
                         : Intrinsics::centered(cfg.width, cfg.height);
    if (cfg.intrinsics.width != cfg.width || cfg.intrinsics.height != cfg.height) {
      throw ConfigError("intrinsics size differs from scene size");
    }
    cfg.params.intrinsics = cfg.intrinsics;
    cfg.noise = impl_->root["noise"] ? parse_noise(impl_->root["noise"])
                                     : NoiseModel::noiseless();
    if (const YAML::Node q = impl_->root["sequence"]) {
      check_keys(q, "sequence", {"frames", "translation", "frame_interval"});
      if (q["frames"]) cfg.sequence.frames = static_cast<int>(to_int(q["frames"], "frames"));
      if (cfg.sequence.frames < 1) throw ConfigError("sequence.frames must be >= 1");
      if (q["translation"]) {
        const auto t = to_array<3>(q["translation"], "translation");
        cfg.sequence.translation = {t[0], t[1], t[2]};
      }
      assign_if(q, "frame_interval", cfg.sequence.frame_interval);
    }
    return cfg;
  });
}

std::string profiles_to_text(const ProfileSet& profiles) {
  std::ostringstream out;
  out << "profiles:\n";
  for (const auto& p : profiles) {
    const auto& t = p.timing();
    out << "  - slice_index: " << p.slice_index() << "\n"
        << "    timing:\n"
        << "      delay_xi: " << format_double(t.delay_xi) << "\n"
        << "      gate_duration: " << format_double(t.gate_duration) << "\n"
        << "      pulse_duration: " << format_double(t.pulse_duration) << "\n"
        << "      gate_edge: " << format_double(t.gate_edge) << "\n"
        << "      peak_response: " << format_double(t.peak_response) << "\n"
        << "    domain: [" << format_double(p.series().domain().lo) << ", "
        << format_double(p.series().domain().hi) << "]\n"
        << "    chebyshev: [";
    const auto& c = p.series().coeffs();
    for (int k = 0; k < kChebyshevTerms; ++k) {
      out << (k ? ", " : "") << format_double(c[k]);
    }
    out << "]\n";
  }
  return out.str();
}

std::string intrinsics_to_text(const Intrinsics& k) {
  std::ostringstream out;
  out << "intrinsics:\n"
      << "  fx: " << format_double(k.fx) << "\n"
      << "  fy: " << format_double(k.fy) << "\n"
      << "  cx: " << format_double(k.cx) << "\n"
      << "  cy: " << format_double(k.cy) << "\n"
      << "  width: " << k.width << "\n"
      << "  height: " << k.height << "\n";
  return out.str();
}

std::string noise_to_text(const NoiseModel& noise) {
  std::ostringstream out;
  out << "noise:\n"
      << "  gaussian_sigma: " << format_double(noise.gaussian_sigma) << "\n"
      << "  poisson_scale: " << format_double(noise.poisson_scale) << "\n"
      << "  seed: " << noise.seed << "\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace gatedsim
