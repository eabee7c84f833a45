#pragma once

#include "bostomo/fields.hpp"
#include "bostomo/scene.hpp"
#include "bostomo/tracer.hpp"
#include "bostomo/vec_ops.hpp"

#include <cstdint>
#include <vector>

namespace bos {

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  int spp = 0;
  std::uint64_t seed = 0;

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(PixelIndex j) const { return at(j.row, j.col); }
};

/// One Monte Carlo sample of a pixel: sensor point, pinhole direction and the tent
/// filter value at the sensor point (1 at the pixel centre, 0 on its border).
struct PixelSample {
  Vec3 x_s;
  Vec3 v_s;
  double weight = 1.0;
};

inline std::uint64_t pixel_stream(const Camera& cam, PixelIndex j) {
  return static_cast<std::uint64_t>(j.row) * static_cast<std::uint64_t>(cam.cols) + static_cast<std::uint64_t>(j.col);
}

/// Draws the sensor point from the normalised tent filter itself, so the estimator
/// reduces to the plain average of the radiance term.
PixelSample sample_pixel(const PixelFootprint& fp, CounterRng& rng);

/// The `count` samples of pixel j under `seed`; sample k is identical for every count > k.
std::vector<PixelSample> pixel_samples(const Camera& cam, PixelIndex j, int count, std::uint64_t seed);

/// Camera ray before it meets the medium: straight from the sensor to the room.
struct CameraRay {
  PixelSample sample;
  bool enters_room = false;
  Vec3 entry = Vec3::Zero();
  double outside_length = 0.0;
  ql::QueryLine line;
};

CameraRay prepare_camera_ray(const Scene& scene, const PixelSample& sample, double step, int max_steps);

namespace detail {
template <class S>
S abs_s(const S& x) {
  return value_of(x) < 0.0 ? -x : x;
}
}  // namespace detail

/// Self-luminous Lambertian wall: bilinear texture lookup at the wall coordinates of x_w.
template <class S>
S textured_luminance(const WallPlane& wall, const vops::V3<S>& x_w) {
  const S d1 = (x_w[0] - wall.point[0]) * wall.e1[0] + (x_w[1] - wall.point[1]) * wall.e1[1] +
               (x_w[2] - wall.point[2]) * wall.e1[2];
  const S d2 = (x_w[0] - wall.point[0]) * wall.e2[0] + (x_w[1] - wall.point[1]) * wall.e2[1] +
               (x_w[2] - wall.point[2]) * wall.e2[2];
  if (std::abs(value_of(d1)) > 0.5 * wall.width || std::abs(value_of(d2)) > 0.5 * wall.height) return S(0.0);
  const S u = d1 / wall.width + 0.5;
  const S v = 0.5 - d2 / wall.height;
  return wall.texture.sample(u, v);
}

/// Pinhole projector: x_w maps along the straight line to the pinhole onto the pattern;
/// the result is scaled by power * |<n_w, d>| / |x_w - x_proj|^2. `arrival` optionally
/// replaces the straight incident direction used for the pattern lookup.
template <class S>
S projector_luminance(const Projector& proj, const WallPlane& wall, const vops::V3<S>& x_w,
                      const Vec3* arrival = nullptr) {
  using std::sqrt;
  const vops::V3<S> d = vops::sub(x_w, vops::from<S>(proj.position));
  const S dist2 = vops::dot(d, d);
  const S dist = sqrt(dist2);
  const Vec3 right = proj.right();
  S depth, lateral, vertical;
  if (arrival) {
    depth = S(arrival->dot(proj.forward));
    lateral = S(arrival->dot(right));
    vertical = S(arrival->dot(proj.up));
  } else {
    depth = vops::dot(d, proj.forward);
    lateral = vops::dot(d, right);
    vertical = vops::dot(d, proj.up);
  }
  if (!(value_of(depth) > 0.0)) return S(0.0);
  const S u = (lateral / depth) * (proj.focal_length / proj.pattern_width) + 0.5;
  const S v = 0.5 - (vertical / depth) * (proj.focal_length / proj.pattern_height);
  if (value_of(u) < 0.0 || value_of(u) > 1.0 || value_of(v) < 0.0 || value_of(v) > 1.0) return S(0.0);
  const S cosine = detail::abs_s(vops::dot(d, wall.normal)) / dist;
  return proj.power * proj.pattern.sample(u, v) * cosine / dist2;
}

/// Radiance term of one sample given its wall hit: L_wall * |<n_w, v_w>|/|v_w| / |r|
/// (or / |r|^2 when inverse_square is set). `outside_length` is the straight sensor-to-room part.
template <class S>
S hit_contribution(const Scene& scene, const WallHitT<S>& hit, double outside_length) {
  const S luminance = scene.projector ? projector_luminance<S>(*scene.projector, scene.wall, hit.x)
                                      : textured_luminance<S>(scene.wall, hit.x);
  if (value_of(luminance) == 0.0) return S(0.0);
  const S speed = vops::norm(hit.v);
  const S cosine = detail::abs_s(vops::dot(hit.v, scene.wall.normal)) / speed;
  const S r = hit.path_length + outside_length;
  return scene.render.inverse_square ? luminance * cosine / (r * r) : luminance * cosine / r;
}

double wall_luminance_textured(const WallPlane& wall, const Vec3& x_w, const Vec3& v_w);
double wall_luminance_projector(const Projector& proj, const WallPlane& wall, const Vec3& x_w);

/// Unbiased estimate of the pixel integral from `spp` samples; misses contribute 0.
double render_pixel(const Scene& scene, const ScalarField& eta, PixelIndex j, int spp, std::uint64_t seed);

/// All pixels; per-pixel streams make the result independent of scheduling.
Image render_image(const Scene& scene, const ScalarField& eta, int spp, std::uint64_t seed);

/// Radiance of a single traced sample (exposed for tests and the CLI trace command).
double render_sample(const Scene& scene, const ScalarField& eta, const PixelSample& sample);

}  // namespace bos
