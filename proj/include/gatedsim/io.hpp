#pragma once

// Image and plain-text file formats.
//
//   slices / passive   PGM P5, 16 bit big-endian, value = round(Z * 65535)
//   masks              PGM P5, 8 bit, 0 / 255
//   depth              PFM "Pf", little-endian float32 (scale -1.0), rows
//                      stored bottom to top
//   poses              "frame_id r00 r01 r02 r10 ... r22 tx ty tz" per line
//   points             "x y depth" per line
//   samples            "r intensity" per line
// '#' starts a comment in the text formats.

#include "gatedsim/formation.hpp"
#include "gatedsim/eval.hpp"
#include "gatedsim/geometry.hpp"
#include "gatedsim/image.hpp"
#include "gatedsim/rip.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gatedsim {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_pgm16(const std::filesystem::path& path, const ImageD& image);
/// Values are scaled by 1 / maxval (8- or 16-bit files).
ImageD read_pgm(const std::filesystem::path& path);

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_pgm(const std::filesystem::path& path);

void write_pfm(const std::filesystem::path& path, const ImageD& image);
ImageD read_pfm(const std::filesystem::path& path);

/// <prefix>_slice{0,1,2}.pgm and <prefix>_passive.pgm.
void write_frame(const std::string& prefix, const GatedFrame& frame);
GatedFrame read_frame(const std::string& prefix);
GatedFrame read_frame(const std::filesystem::path& slice0,
                      const std::filesystem::path& slice1,
                      const std::filesystem::path& slice2,
                      const std::filesystem::path& passive);

/// Rounds every value through the 16-bit PGM encoding.
ImageD quantize16(const ImageD& image);

using PoseSequence = std::map<std::int64_t, RigidPose>;
void write_poses(const std::filesystem::path& path, const PoseSequence& poses);
PoseSequence read_poses(const std::filesystem::path& path);

std::vector<GroundTruthPoint> read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path,
                  const std::vector<GroundTruthPoint>& points);

std::vector<ProfileSample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path,
                   const std::vector<ProfileSample>& samples);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace gatedsim
