#pragma once

#include "bostomo/common.hpp"
#include "bostomo/constants.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace bos {

inline double value_of(double x) { return x; }

/// Continuous scalar field over the room: value and exact spatial gradient.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual double value(const Vec3& x) const = 0;
  virtual Vec3 gradient(const Vec3& x) const = 0;
  virtual std::pair<double, Vec3> value_and_gradient(const Vec3& x) const {
    return {value(x), gradient(x)};
  }
};

enum class OutOfBounds { Error, Clamp };

/// Regular node-centred grid over `bbox` with `channels` planar channels.
/// Storage order is x fastest, then y, then z, then channel.
struct VoxelGrid {
  std::array<int, 3> dims{2, 2, 2};
  Box bbox;
  int channels = 1;
  std::vector<double> data;

  VoxelGrid() = default;
  VoxelGrid(std::array<int, 3> dims, Box bbox, int channels = 1, double fill = 0.0);

  std::size_t index(int i, int j, int k, int c = 0) const {
    return ((static_cast<std::size_t>(c) * dims[2] + k) * dims[1] + j) * dims[0] + i;
  }
  double& at(int i, int j, int k, int c = 0) { return data[index(i, j, k, c)]; }
  double at(int i, int j, int k, int c = 0) const { return data[index(i, j, k, c)]; }

  Vec3 spacing() const;
  Vec3 node(int i, int j, int k) const;
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

double grid_value(const VoxelGrid& g, const Vec3& x, int channel = 0,
                  OutOfBounds mode = OutOfBounds::Error);

/// Exact gradient of the trilinear interpolant (constant along each axis within a cell,
/// bilinear in the other two).
Vec3 grid_gradient(const VoxelGrid& g, const Vec3& x, int channel = 0,
                   OutOfBounds mode = OutOfBounds::Error);

/// One channel of a voxel grid viewed as a field. Queries outside the box clamp.
class GridField final : public ScalarField {
 public:
  explicit GridField(std::shared_ptr<const VoxelGrid> grid, int channel = 0);
  double value(const Vec3& x) const override;
  Vec3 gradient(const Vec3& x) const override;

  const VoxelGrid& grid() const { return *grid_; }

 private:
  std::shared_ptr<const VoxelGrid> grid_;
  int channel_;
};

class ConstantField final : public ScalarField {
 public:
  explicit ConstantField(double v) : v_(v) {}
  double value(const Vec3&) const override { return v_; }
  Vec3 gradient(const Vec3&) const override { return Vec3::Zero(); }

 private:
  double v_;
};

/// Closed-form field given as value and gradient closures.
class AnalyticField final : public ScalarField {
 public:
  using ValueFn = std::function<double(const Vec3&)>;
  using GradFn = std::function<Vec3(const Vec3&)>;
  AnalyticField(ValueFn value, GradFn gradient)
      : value_(std::move(value)), gradient_(std::move(gradient)) {}
  double value(const Vec3& x) const override { return value_(x); }
  Vec3 gradient(const Vec3& x) const override { return gradient_(x); }

 private:
  ValueFn value_;
  GradFn gradient_;
};

/// eta = 1 + rho0_G * T0 / T. Throws std::domain_error for T <= 0.
double eta_from_temperature(double T, const MediumConstants& m);

/// Refractive index field of a temperature field; gradient by the chain rule
/// grad eta = -rho0_G * T0 / T^2 * grad T.
class EtaFromTemperature final : public ScalarField {
 public:
  EtaFromTemperature(std::shared_ptr<const ScalarField> temperature, MediumConstants m)
      : T_(std::move(temperature)), m_(m) {}
  double value(const Vec3& x) const override;
  Vec3 gradient(const Vec3& x) const override;
  std::pair<double, Vec3> value_and_gradient(const Vec3& x) const override;

 private:
  std::shared_ptr<const ScalarField> T_;
  MediumConstants m_;
};

/// Nonnegative luminance map. Texel (r, c) covers u in [c/cols, (c+1)/cols) and
/// v in [r/rows, (r+1)/rows); v runs top to bottom. Sampling is bilinear between
/// texel centres and clamps outside [0, 1]^2.
struct Texture {
  int rows = 1;
  int cols = 1;
  std::vector<double> data{0.0};

  Texture() = default;
  Texture(int rows, int cols, double fill = 0.0)
      : rows(rows), cols(cols), data(static_cast<std::size_t>(rows) * cols, fill) {}

  bool operator==(const Texture&) const = default;

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  template <class S>
  S sample(const S& u, const S& v) const {
    const S px = u * static_cast<double>(cols) - 0.5;
    const S py = v * static_cast<double>(rows) - 0.5;
    const double fx = std::floor(value_of(px));
    const double fy = std::floor(value_of(py));
    const S tx = px - fx;
    const S ty = py - fy;
    const int c0 = clamp_index(fx, cols), c1 = clamp_index(fx + 1.0, cols);
    const int r0 = clamp_index(fy, rows), r1 = clamp_index(fy + 1.0, rows);
    const double a = at(r0, c0), b = at(r0, c1), c = at(r1, c0), d = at(r1, c1);
    const S top = a + tx * (b - a);
    const S bottom = c + tx * (d - c);
    return top + ty * (bottom - top);
  }

  double max_value() const;

 private:
  static int clamp_index(double f, int n) {
    if (f < 0.0) return 0;
    if (f > n - 1) return n - 1;
    return static_cast<int>(f);
  }
};

/// Band-limited random-phase noise: every Fourier mode with radial frequency in
/// [min_freq, max_freq] (cycles per texture width) gets unit amplitude and a
/// seeded random phase; the result is rescaled to [0, 1].
Texture make_noise_texture(std::uint64_t seed, int resolution, double min_freq, double max_freq);

}  // namespace bos
