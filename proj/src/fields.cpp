#include "bostomo/fields.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bos {

VoxelGrid::VoxelGrid(std::array<int, 3> dims_, Box bbox_, int channels_, double fill)
    : dims(dims_), bbox(bbox_), channels(channels_) {
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) throw ValidationError("voxel grid needs >= 2 nodes per axis");
  if (channels < 1) throw ValidationError("voxel grid needs >= 1 channel");
  data.assign(voxel_count() * channels, fill);
}

Vec3 VoxelGrid::spacing() const {
  return bbox.extent().cwiseQuotient(Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1));
}

Vec3 VoxelGrid::node(int i, int j, int k) const {
  return bbox.lo + spacing().cwiseProduct(Vec3(i, j, k));
}

void VoxelGrid::validate() const {
  if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2)
    throw ValidationError("voxel grid needs >= 2 nodes per axis");
  if (bbox.degenerate()) throw ValidationError("voxel grid bbox is degenerate");
  if (channels < 1) throw ValidationError("voxel grid needs >= 1 channel");
  if (data.size() != voxel_count() * channels)
    throw ValidationError("voxel grid data length does not match dims * channels");
}

namespace {

struct CellLocation {
  std::array<int, 3> base;
  Vec3 frac;
  std::array<bool, 3> clamped{false, false, false};
};

CellLocation locate(const VoxelGrid& g, const Vec3& x, OutOfBounds mode) {
  const Vec3 tol = 1e-12 * g.bbox.extent();
  Vec3 q = x;
  CellLocation loc;
  for (int a = 0; a < 3; ++a) {
    if (x[a] < g.bbox.lo[a] - tol[a] || x[a] > g.bbox.hi[a] + tol[a]) {
      if (mode == OutOfBounds::Error)
        throw std::out_of_range("voxel grid query outside bounding box");
      loc.clamped[a] = true;
    }
  }
  q = g.bbox.clamp(q);
  const Vec3 h = g.spacing();
  for (int a = 0; a < 3; ++a) {
    const double f = (q[a] - g.bbox.lo[a]) / h[a];
    int i = static_cast<int>(std::floor(f));
    i = std::clamp(i, 0, g.dims[a] - 2);
    loc.base[a] = i;
    loc.frac[a] = f - i;
  }
  return loc;
}

}  // namespace

double grid_value(const VoxelGrid& g, const Vec3& x, int channel, OutOfBounds mode) {
  const CellLocation c = locate(g, x, mode);
  const auto [i, j, k] = c.base;
  const double tx = c.frac[0], ty = c.frac[1], tz = c.frac[2];
  auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
  const double c00 = lerp(g.at(i, j, k, channel), g.at(i + 1, j, k, channel), tx);
  const double c10 = lerp(g.at(i, j + 1, k, channel), g.at(i + 1, j + 1, k, channel), tx);
  const double c01 = lerp(g.at(i, j, k + 1, channel), g.at(i + 1, j, k + 1, channel), tx);
  const double c11 = lerp(g.at(i, j + 1, k + 1, channel), g.at(i + 1, j + 1, k + 1, channel), tx);
  return lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz);
}

Vec3 grid_gradient(const VoxelGrid& g, const Vec3& x, int channel, OutOfBounds mode) {
  const CellLocation c = locate(g, x, mode);
  const auto [i, j, k] = c.base;
  const double tx = c.frac[0], ty = c.frac[1], tz = c.frac[2];
  double f[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) f[dx][dy][dz] = g.at(i + dx, j + dy, k + dz, channel);
  const Vec3 h = g.spacing();
  double gx = 0.0, gy = 0.0, gz = 0.0;
  for (int dy = 0; dy < 2; ++dy)
    for (int dz = 0; dz < 2; ++dz)
      gx += (f[1][dy][dz] - f[0][dy][dz]) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
  for (int dx = 0; dx < 2; ++dx)
    for (int dz = 0; dz < 2; ++dz)
      gy += (f[dx][1][dz] - f[dx][0][dz]) * (dx ? tx : 1 - tx) * (dz ? tz : 1 - tz);
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      gz += (f[dx][dy][1] - f[dx][dy][0]) * (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty);
  Vec3 grad(gx / h[0], gy / h[1], gz / h[2]);
  for (int a = 0; a < 3; ++a)
    if (c.clamped[a]) grad[a] = 0.0;
  return grad;
}

GridField::GridField(std::shared_ptr<const VoxelGrid> grid, int channel)
    : grid_(std::move(grid)), channel_(channel) {
  grid_->validate();
  if (channel_ < 0 || channel_ >= grid_->channels) throw ValidationError("grid channel out of range");
}

double GridField::value(const Vec3& x) const {
  return grid_value(*grid_, x, channel_, OutOfBounds::Clamp);
}

Vec3 GridField::gradient(const Vec3& x) const {
  return grid_gradient(*grid_, x, channel_, OutOfBounds::Clamp);
}

double eta_from_temperature(double T, const MediumConstants& m) {
  if (!(T > 0.0)) throw std::domain_error("temperature must be positive, got " + std::to_string(T));
  return 1.0 + m.rho0_G * m.T0 / T;
}

double EtaFromTemperature::value(const Vec3& x) const { return eta_from_temperature(T_->value(x), m_); }

Vec3 EtaFromTemperature::gradient(const Vec3& x) const { return value_and_gradient(x).second; }

std::pair<double, Vec3> EtaFromTemperature::value_and_gradient(const Vec3& x) const {
  const auto [T, dT] = T_->value_and_gradient(x);
  const double eta = eta_from_temperature(T, m_);
  return {eta, (-m_.rho0_G * m_.T0 / (T * T)) * dT};
}

double Texture::max_value() const { return *std::max_element(data.begin(), data.end()); }

Texture make_noise_texture(std::uint64_t seed, int resolution, double min_freq, double max_freq) {
  if (resolution < 16) throw ValidationError("noise texture resolution must be >= 16");
  if (!(min_freq >= 0.0 && max_freq > min_freq))
    throw ValidationError("noise band must satisfy 0 <= min_freq < max_freq");
  const int n = resolution;
  Eigen::MatrixXcd coeff = Eigen::MatrixXcd::Zero(n, n);
  CounterRng rng(seed, 0x7e47u);
  for (int ky = 0; ky < n; ++ky) {
    for (int kx = 0; kx < n; ++kx) {
      const int fy = ky <= n / 2 ? ky : ky - n;
      const int fx = kx <= n / 2 ? kx : kx - n;
      const double r = std::hypot(fx, fy);
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      if (r >= min_freq && r <= max_freq && r > 0.0) coeff(ky, kx) = std::polar(1.0, phase);
    }
  }
  Eigen::MatrixXcd basis(n, n);
  for (int y = 0; y < n; ++y)
    for (int k = 0; k < n; ++k)
      basis(y, k) = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((static_cast<long>(y) * k) % n) / n);
  const Eigen::MatrixXd field = (basis * coeff * basis.transpose()).real();
  const double lo = field.minCoeff();
  const double hi = field.maxCoeff();
  Texture tex(n, n);
  const double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) tex.at(r, c) = (field(r, c) - lo) * scale;
  return tex;
}

}  // namespace bos
