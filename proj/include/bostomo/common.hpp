#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace bos {

using Vec3 = Eigen::Vector3d;

/// Malformed input that could not be parsed at all.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box, used for the room and voxel grid extents.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  bool operator==(const Box&) const = default;

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  bool degenerate() const { return !((hi.array() > lo.array()).all()); }

  bool contains(const Vec3& x, double tol = 0.0) const {
    return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
  }

  Vec3 clamp(const Vec3& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

  /// Parameter interval [t0, t1] where origin + t * dir lies inside the box.
  std::optional<std::pair<double, double>> slab(const Vec3& origin, const Vec3& dir) const;
};

/// Splitmix64 finalizer; the building block of every counter-based stream.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic stream keyed by (seed, stream id). Two generators built from the
/// same key produce the same sequence regardless of where or when they run.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_(mix64(mix64(seed ^ 0x5851f42d4c957f2dULL) ^ mix64(stream + 0x14057b7ef767814fULL) ^
                   mix64(substream * 0x2545f4914f6cdd1dULL + 1))) {}

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace bos
