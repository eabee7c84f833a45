#include "bostomo/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bos {

namespace {

static_assert(std::endian::native == std::endian::little, "binary IO assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path.string());
  return in;
}

void write_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  out.write(reinterpret_cast<const char*>(&f), sizeof f);
}

std::string next_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("unexpected end of header");
  return tok;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

void write_pfm(const std::filesystem::path& path, int rows, int cols, std::span<const double> data) {
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("write_pfm: data size mismatch");
  auto out = open_out(path);
  out << "Pf\n" << cols << " " << rows << "\n-1.0\n";
  for (int r = rows - 1; r >= 0; --r)
    for (int c = 0; c < cols; ++c) write_f32(out, data[static_cast<std::size_t>(r) * cols + c]);
}

RasterImage read_pfm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string magic = next_token(in);
  if (magic != "Pf") throw ParseError("only grayscale PFM (Pf) is supported: " + path.string());
  RasterImage img;
  double scale = 0.0;
  if (!(in >> img.cols >> img.rows >> scale)) throw ParseError("bad PFM header: " + path.string());
  if (img.rows <= 0 || img.cols <= 0) throw ParseError("bad PFM dimensions: " + path.string());
  if (scale >= 0.0) throw ParseError("big-endian PFM is not supported: " + path.string());
  in.get();
  img.data.resize(static_cast<std::size_t>(img.rows) * img.cols);
  std::vector<float> row(img.cols);
  for (int r = img.rows - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw ParseError("truncated PFM data: " + path.string());
    for (int c = 0; c < img.cols; ++c) img.data[static_cast<std::size_t>(r) * img.cols + c] = row[c];
  }
  return img;
}

namespace {

void put_u32_be(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

void png_chunk(std::ostream& out, const char* type, const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> buf;
  put_u32_be(buf, static_cast<std::uint32_t>(payload.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0L, buf.data() + 4, static_cast<uInt>(buf.size() - 4));
  put_u32_be(buf, static_cast<std::uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_png(const std::filesystem::path& path, int rows, int cols, std::span<const double> data,
               double lo, double hi) {
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("write_png: data size mismatch");
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(rows) * (cols + 1));
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < rows; ++r) {
    raw.push_back(0);
    for (int c = 0; c < cols; ++c) {
      double t = (data[static_cast<std::size_t>(r) * cols + c] - lo) / span;
      t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
      raw.push_back(static_cast<unsigned char>(std::lround(t * 255.0)));
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png compression failed");
  z.resize(zlen);

  auto out = open_out(path);
  static const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(signature), 8);
  std::vector<unsigned char> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(cols));
  put_u32_be(ihdr, static_cast<std::uint32_t>(rows));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit grayscale
  png_chunk(out, "IHDR", ihdr);
  png_chunk(out, "IDAT", z);
  png_chunk(out, "IEND", {});
}

void write_voxgrid(const std::filesystem::path& path, const VoxelGrid& g) {
  g.validate();
  auto out = open_out(path);
  out << "VOXGRID v1\n";
  out << "dims " << g.dims[0] << " " << g.dims[1] << " " << g.dims[2] << "\n";
  out << "bbox";
  for (int a = 0; a < 3; ++a) out << " " << format_double(g.bbox.lo[a]);
  for (int a = 0; a < 3; ++a) out << " " << format_double(g.bbox.hi[a]);
  out << "\nchannels " << g.channels << "\n";
  for (double v : g.data) write_f32(out, v);
}

VoxelGrid read_voxgrid(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "VOXGRID v1") throw ParseError("missing VOXGRID v1 magic: " + path.string());
  VoxelGrid g;
  auto header_line = [&](const std::string& key) {
    if (!std::getline(in, line)) throw ParseError("truncated VOXGRID header: " + path.string());
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw ParseError("expected '" + key + "' in VOXGRID header: " + path.string());
    return ss;
  };
  {
    auto ss = header_line("dims");
    if (!(ss >> g.dims[0] >> g.dims[1] >> g.dims[2])) throw ParseError("bad VOXGRID dims");
  }
  {
    auto ss = header_line("bbox");
    if (!(ss >> g.bbox.lo[0] >> g.bbox.lo[1] >> g.bbox.lo[2] >> g.bbox.hi[0] >> g.bbox.hi[1] >> g.bbox.hi[2]))
      throw ParseError("bad VOXGRID bbox");
  }
  {
    auto ss = header_line("channels");
    if (!(ss >> g.channels)) throw ParseError("bad VOXGRID channel count");
  }
  if (g.dims[0] < 2 || g.dims[1] < 2 || g.dims[2] < 2 || g.channels < 1)
    throw ValidationError("VOXGRID header violates dims >= 2 / channels >= 1: " + path.string());
  const std::size_t n = g.voxel_count() * g.channels;
  std::vector<float> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw ParseError("truncated VOXGRID data: " + path.string());
  g.data.assign(raw.begin(), raw.end());
  g.validate();
  return g;
}

Texture texture_from_raster(const RasterImage& img) {
  Texture t(img.rows, img.cols);
  t.data = img.data;
  for (double v : t.data)
    if (!(v >= 0.0)) throw ValidationError("texture values must be finite and >= 0");
  return t;
}

}  // namespace bos
