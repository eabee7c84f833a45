#pragma once

#include "bostomo/fields.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bos {

/// Row-major single-channel float image; row 0 is the top row.
struct RasterImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
};

/// Grayscale PFM ("Pf"), little-endian, bottom row first on disk as the format requires.
void write_pfm(const std::filesystem::path& path, int rows, int cols, std::span<const double> data);
RasterImage read_pfm(const std::filesystem::path& path);

/// 8-bit grayscale PNG preview; values are mapped linearly from [lo, hi] to [0, 255].
void write_png(const std::filesystem::path& path, int rows, int cols, std::span<const double> data,
               double lo, double hi);

/// VOXGRID v1: four ASCII header lines
///   VOXGRID v1
///   dims <nx> <ny> <nz>
///   bbox <xmin> <ymin> <zmin> <xmax> <ymax> <zmax>
///   channels <c>
/// followed by little-endian float32 samples, x fastest, then y, z, channel.
void write_voxgrid(const std::filesystem::path& path, const VoxelGrid& g);
VoxelGrid read_voxgrid(const std::filesystem::path& path);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

Texture texture_from_raster(const RasterImage& img);

}  // namespace bos
