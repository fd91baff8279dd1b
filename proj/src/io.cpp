#include "gatedsim/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gatedsim {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError("truncated header: " + path.string());
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0) {
    throw IoError("bad header field '" + tok + "' in " + path.string());
  }
  return v;
}

struct RawPgm {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

void write_pgm_raw(const std::filesystem::path& path, int w, int h, int maxval,
                   const std::vector<std::uint16_t>& samples) {
  auto out = open_out(path);
  out << "P5\n" << w << ' ' << h << '\n' << maxval << '\n';
  if (maxval > 255) {
    std::vector<unsigned char> bytes(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      bytes[2 * i] = static_cast<unsigned char>(samples[i] >> 8);
      bytes[2 * i + 1] = static_cast<unsigned char>(samples[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  } else {
    std::vector<unsigned char> bytes(samples.begin(), samples.end());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  finish(out, path);
}

RawPgm read_pgm_raw(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (header_token(in, path) != "P5") {
    throw IoError("not a binary PGM (P5): " + path.string());
  }
  RawPgm pgm;
  pgm.width = header_int(in, path);
  pgm.height = header_int(in, path);
  pgm.maxval = header_int(in, path);
  if (pgm.maxval > 65535) throw IoError("PGM maxval too large: " + path.string());
  const std::size_t n = static_cast<std::size_t>(pgm.width) * pgm.height;
  const std::size_t bps = pgm.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(n * bps);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw IoError("truncated PGM data: " + path.string());
  }
  pgm.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pgm.samples[i] = bps == 2
                         ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1])
                         : bytes[i];
  }
  return pgm;
}

std::uint16_t encode16(double z) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(z, 0.0, 1.0) * 65535.0));
}

// Reads non-empty, non-comment lines as whitespace-separated numbers.
std::vector<std::vector<double>> read_rows(const std::filesystem::path& path,
                                           std::size_t columns) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) {
        throw IoError(path.string() + ":" + std::to_string(lineno) +
                      ": not a number '" + tok + "'");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (row.size() != columns) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(columns) + " columns, got " +
                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

void write_pgm16(const std::filesystem::path& path, const ImageD& image) {
  std::vector<std::uint16_t> samples(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) samples[i] = encode16(image[i]);
  write_pgm_raw(path, image.width(), image.height(), 65535, samples);
}

ImageD read_pgm(const std::filesystem::path& path) {
  const RawPgm pgm = read_pgm_raw(path);
  ImageD out(pgm.width, pgm.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(pgm.samples[i]) / pgm.maxval;
  }
  return out;
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint16_t> samples(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) samples[i] = mask[i] ? 255 : 0;
  write_pgm_raw(path, mask.width(), mask.height(), 255, samples);
}

Mask read_mask_pgm(const std::filesystem::path& path) {
  const RawPgm pgm = read_pgm_raw(path);
  Mask out(pgm.width, pgm.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pgm.samples[i] != 0;
  return out;
}

void write_pfm(const std::filesystem::path& path, const ImageD& image) {
  static_assert(std::endian::native == std::endian::little,
                "PFM writer assumes a little-endian host");
  auto out = open_out(path);
  out << "Pf\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(image.width()));
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) row[x] = static_cast<float>(image(x, y));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  finish(out, path);
}

ImageD read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  if (magic != "Pf") throw IoError("only grayscale PFM (Pf) supported: " + path.string());
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const std::string scale_tok = header_token(in, path);
  double scale = 0.0;
  auto [p, ec] = std::from_chars(scale_tok.data(), scale_tok.data() + scale_tok.size(), scale);
  if (ec != std::errc() || scale == 0.0) throw IoError("bad PFM scale: " + path.string());
  const bool big_endian = scale > 0.0;

  ImageD out(w, h);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(w));
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != row.size() * sizeof(std::uint32_t)) {
      throw IoError("truncated PFM data: " + path.string());
    }
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = row[x];
      if (big_endian) {
        bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) |
               ((bits >> 8) & 0xff00u) | (bits >> 24);
      }
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      out(x, y) = f;
    }
  }
  return out;
}

void write_frame(const std::string& prefix, const GatedFrame& frame) {
  frame.validate();
  for (int i = 0; i < kNumSlices; ++i) {
    write_pgm16(prefix + "_slice" + std::to_string(i) + ".pgm", frame.slices[i]);
  }
  write_pgm16(prefix + "_passive.pgm", frame.passive);
}

GatedFrame read_frame(const std::string& prefix) {
  return read_frame(prefix + "_slice0.pgm", prefix + "_slice1.pgm",
                    prefix + "_slice2.pgm", prefix + "_passive.pgm");
}

GatedFrame read_frame(const std::filesystem::path& slice0,
                      const std::filesystem::path& slice1,
                      const std::filesystem::path& slice2,
                      const std::filesystem::path& passive) {
  GatedFrame f;
  f.slices = {read_pgm(slice0), read_pgm(slice1), read_pgm(slice2)};
  f.passive = read_pgm(passive);
  f.validate();
  return f;
}

ImageD quantize16(const ImageD& image) {
  ImageD out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = encode16(image[i]) / 65535.0;
  return out;
}

void write_poses(const std::filesystem::path& path, const PoseSequence& poses) {
  auto out = open_out(path);
  for (const auto& [id, pose] : poses) {
    out << id;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << format_double(pose.rotation(r, c));
    }
    for (int r = 0; r < 3; ++r) out << ' ' << format_double(pose.translation(r));
    out << '\n';
  }
  finish(out, path);
}

PoseSequence read_poses(const std::filesystem::path& path) {
  PoseSequence poses;
  for (const auto& row : read_rows(path, 13)) {
    const double id = row[0];
    if (id != std::floor(id)) throw IoError("pose frame_id is not an integer");
    RigidPose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = row[1 + 3 * r + c];
    }
    for (int r = 0; r < 3; ++r) p.translation(r) = row[10 + r];
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    poses[static_cast<std::int64_t>(id)] = p;
  }
  return poses;
}

std::vector<GroundTruthPoint> read_points(const std::filesystem::path& path) {
  std::vector<GroundTruthPoint> out;
  for (const auto& row : read_rows(path, 3)) {
    out.push_back({static_cast<int>(std::lround(row[0])),
                   static_cast<int>(std::lround(row[1])), row[2]});
  }
  return out;
}

void write_points(const std::filesystem::path& path,
                  const std::vector<GroundTruthPoint>& points) {
  auto out = open_out(path);
  for (const auto& p : points) {
    out << p.x << ' ' << p.y << ' ' << format_double(p.depth) << '\n';
  }
  finish(out, path);
}

std::vector<ProfileSample> read_samples(const std::filesystem::path& path) {
  std::vector<ProfileSample> out;
  for (const auto& row : read_rows(path, 2)) out.push_back({row[0], row[1]});
  return out;
}

void write_samples(const std::filesystem::path& path,
                   const std::vector<ProfileSample>& samples) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    out << format_double(s.r) << ' ' << format_double(s.intensity) << '\n';
  }
  finish(out, path);
}

}  // namespace gatedsim
