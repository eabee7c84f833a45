#include "bostomo/renderer.hpp"

#include "bostomo/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace bos {

namespace {

using Node = ql::Node<double>;

std::vector<Node> straight_from_sensor(const PixelSample& s, double eta_amb) {
  return {Node{0.0, vops::from<double>(s.x_s), vops::from<double>(Vec3(eta_amb * s.v_s))}};
}

std::vector<Node> trace_inside(const Scene& scene, const ScalarField& eta, const CameraRay& ray) {
  const Ray r0 = Ray::launch(eta, ray.entry, ray.sample.v_s);
  if (scene.trace.integrator == Integrator::Nonlinear) {
    const RayPath path = trace_nonlinear(eta, r0, scene.room, scene.trace);
    std::vector<Node> nodes;
    nodes.reserve(path.samples.size());
    for (const auto& p : path.samples) nodes.push_back({p.t, vops::from<double>(p.x), vops::from<double>(p.v)});
    return nodes;
  }
  const ql::QueryLine& line = ray.line;
  const int nq = line.query_count();
  std::vector<double> etas(nq);
  std::vector<vops::V3<double>> forces(nq);
  for (int k = 0; k < nq; ++k) {
    const auto [n, g] = eta.value_and_gradient(line.query_point(k));
    etas[k] = n;
    forces[k] = {n * g[0], n * g[1], n * g[2]};
  }
  std::vector<Node> nodes = ql::integrate<double>(line, etas, forces);
  if (!line.truncated) ql::close_at_box(nodes, scene.room);
  return nodes;
}

/// Refracted projector leg: traces from the wall point towards the projector pinhole and
/// returns the direction in which the light must have left the projector.
Vec3 projector_arrival(const Scene& scene, const ScalarField& eta, const Vec3& x_w) {
  const Projector& proj = *scene.projector;
  const Vec3 dir = (proj.position - x_w).normalized();
  const Ray r0 = Ray::launch(eta, scene.room.clamp(x_w), dir);
  const RayPath path = trace_quasilinear(eta, r0, scene.room, scene.trace);
  return -path.samples.back().v.normalized();
}

}  // namespace

PixelSample sample_pixel(const PixelFootprint& fp, CounterRng& rng) {
  // The sum of two uniforms on [0, 1) is tent-distributed on [0, 2).
  const double a = 0.5 * (rng.uniform() + rng.uniform()) - 0.5;
  const double b = 0.5 * (rng.uniform() + rng.uniform()) - 0.5;
  PixelSample s;
  s.x_s = fp.point(a, b);
  s.v_s = fp.direction(s.x_s);
  s.weight = (1.0 - 2.0 * std::abs(a)) * (1.0 - 2.0 * std::abs(b));
  return s;
}

std::vector<PixelSample> pixel_samples(const Camera& cam, PixelIndex j, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("spp must be >= 1");
  const PixelFootprint fp = pixel_footprint(cam, j);
  CounterRng rng(seed, pixel_stream(cam, j));
  std::vector<PixelSample> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(sample_pixel(fp, rng));
  return out;
}

CameraRay prepare_camera_ray(const Scene& scene, const PixelSample& sample, double step, int max_steps) {
  CameraRay ray;
  ray.sample = sample;
  const auto span = scene.room.slab(sample.x_s, sample.v_s);
  if (!span || span->second <= std::max(span->first, 0.0)) return ray;
  const double t_in = std::max(span->first, 0.0);
  ray.enters_room = true;
  ray.entry = scene.room.clamp(sample.x_s + t_in * sample.v_s);
  ray.outside_length = (ray.entry - sample.x_s).norm();
  ray.line = ql::make_query_line(ray.entry, sample.v_s, scene.room, step, max_steps);
  return ray;
}

double wall_luminance_textured(const WallPlane& wall, const Vec3& x_w, const Vec3& /*v_w*/) {
  return textured_luminance<double>(wall, vops::from<double>(x_w));
}

double wall_luminance_projector(const Projector& proj, const WallPlane& wall, const Vec3& x_w) {
  return projector_luminance<double>(proj, wall, vops::from<double>(x_w));
}

double render_sample(const Scene& scene, const ScalarField& eta, const PixelSample& sample) {
  const CameraRay ray = prepare_camera_ray(scene, sample, scene.trace.step, scene.trace.max_steps);
  std::vector<Node> nodes =
      ray.enters_room ? trace_inside(scene, eta, ray) : straight_from_sensor(sample, scene.ambient_eta());
  const auto hit = intersect_wall_nodes<double>(nodes, scene.wall, /*extend_beyond_end=*/true);
  if (!hit) return 0.0;
  if (scene.projector && scene.render.trace_projector_leg) {
    const Vec3 x_w = vops::to_vec3(hit->x);
    const Vec3 arrival = projector_arrival(scene, eta, x_w);
    const double lum = projector_luminance<double>(*scene.projector, scene.wall, hit->x, &arrival);
    if (lum == 0.0) return 0.0;
    const Vec3 v_w = vops::to_vec3(hit->v);
    const double cosine = std::abs(v_w.dot(scene.wall.normal)) / v_w.norm();
    const double r = hit->path_length + ray.outside_length;
    return scene.render.inverse_square ? lum * cosine / (r * r) : lum * cosine / r;
  }
  return hit_contribution<double>(scene, *hit, ray.outside_length);
}

double render_pixel(const Scene& scene, const ScalarField& eta, PixelIndex j, int spp, std::uint64_t seed) {
  const auto samples = pixel_samples(scene.camera, j, spp, seed);
  double sum = 0.0;
  for (const auto& s : samples) sum += render_sample(scene, eta, s);
  return sum / spp;
}

Image render_image(const Scene& scene, const ScalarField& eta, int spp, std::uint64_t seed) {
  if (spp < 1) throw std::invalid_argument("spp must be >= 1");
  Image img;
  img.rows = scene.camera.rows;
  img.cols = scene.camera.cols;
  img.spp = spp;
  img.seed = seed;
  img.data.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0);
  parallel_for(img.data.size(), [&](std::size_t i) {
    const PixelIndex j{static_cast<int>(i / img.cols), static_cast<int>(i % img.cols)};
    img.data[i] = render_pixel(scene, eta, j, spp, seed);
  });
  return img;
}

}  // namespace bos
