#include "bostomo/tracer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bos {

namespace {

using Node = ql::Node<double>;

Node to_node(double t, const Vec3& x, const Vec3& v) { return {t, {x[0], x[1], x[2]}, {v[0], v[1], v[2]}}; }

RayPath to_path(const std::vector<Node>& nodes, Termination term) {
  RayPath p;
  p.termination = term;
  p.samples.reserve(nodes.size());
  for (const auto& n : nodes) p.samples.push_back({n.t, vops::to_vec3(n.x), vops::to_vec3(n.v)});
  return p;
}

void check_start(const Ray& r0, const Box& box) {
  if (!box.contains(r0.x, 1e-9 * box.extent().maxCoeff())) throw std::invalid_argument("ray must start inside the box");
  if (!(r0.v.norm() > 0.0)) throw std::invalid_argument("ray velocity must be nonzero");
}

/// Truncates at the first wall crossing, if any.
Termination apply_stop(std::vector<Node>& nodes, const WallPlane* stop, Termination term) {
  if (!stop) return term;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double d0 = stop->signed_distance(vops::to_vec3(nodes[k - 1].x));
    const double d1 = stop->signed_distance(vops::to_vec3(nodes[k].x));
    if (d0 > 0.0 && d1 <= 0.0) {
      const double a = d0 / (d0 - d1);
      Node end{nodes[k - 1].t + a * (nodes[k].t - nodes[k - 1].t), vops::lerp(nodes[k - 1].x, nodes[k].x, a),
               vops::lerp(nodes[k - 1].v, nodes[k].v, a)};
      nodes.resize(k);
      nodes.push_back(end);
      return Termination::HitWall;
    }
  }
  return term;
}

}  // namespace

Ray Ray::launch(const ScalarField& eta, const Vec3& x, const Vec3& dir) {
  return Ray{x, eta.value(x) * dir.normalized()};
}

RayPath trace_nonlinear(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg,
                        const WallPlane* stop) {
  check_start(r0, box);
  auto force = [&](const Vec3& x) {
    const auto [n, g] = eta.value_and_gradient(x);
    return Vec3(n * g);
  };
  const double h = cfg.step;
  std::vector<Node> nodes;
  nodes.reserve(std::min(cfg.max_steps, 1 << 16) + 2);
  Vec3 x = r0.x, v = r0.v;
  double t = 0.0;
  nodes.push_back(to_node(t, x, v));
  Termination term = Termination::MaxSteps;
  for (int step = 0; step < cfg.max_steps; ++step) {
    const Vec3 k1x = v;
    const Vec3 k1v = force(x);
    const Vec3 k2x = v + 0.5 * h * k1v;
    const Vec3 k2v = force(x + 0.5 * h * k1x);
    const Vec3 k3x = v + 0.5 * h * k2v;
    const Vec3 k3v = force(x + 0.5 * h * k2x);
    const Vec3 k4x = v + h * k3v;
    const Vec3 k4v = force(x + h * k3x);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    t = h * (step + 1);
    nodes.push_back(to_node(t, x, v));
    if (!box.contains(x)) {
      ql::close_at_box(nodes, box);
      term = Termination::ExitedBox;
      break;
    }
  }
  term = apply_stop(nodes, stop, term);
  return to_path(nodes, term);
}

namespace ql {

QueryLine make_query_line(const Vec3& origin, const Vec3& dir, const Box& box, double step, int max_steps) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  QueryLine line;
  line.origin = origin;
  line.dir = dir.normalized();
  const auto span = box.slab(origin, line.dir);
  double length = span ? std::max(0.0, span->second) : 0.0;
  int steps = std::max(1, static_cast<int>(std::ceil(length / step - 1e-9)));
  if (steps > max_steps) {
    steps = max_steps;
    length = steps * step;
    line.truncated = true;
  }
  if (length <= 0.0) length = std::numeric_limits<double>::min();
  line.length = length;
  line.steps = steps;
  return line;
}

}  // namespace ql

RayPath trace_quasilinear(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg,
                          const WallPlane* stop) {
  check_start(r0, box);
  const ql::QueryLine line = ql::make_query_line(r0.x, r0.v, box, cfg.step, cfg.max_steps);
  const int nq = line.query_count();
  std::vector<double> etas(nq);
  std::vector<vops::V3<double>> forces(nq);
  for (int k = 0; k < nq; ++k) {
    const auto [n, g] = eta.value_and_gradient(line.query_point(k));
    etas[k] = n;
    forces[k] = {n * g[0], n * g[1], n * g[2]};
  }
  // |v0| is the launch speed, which the ray carries as eta(x0).
  etas[0] = r0.v.norm();
  std::vector<Node> nodes = ql::integrate<double>(line, etas, forces);
  Termination term = Termination::MaxSteps;
  if (!line.truncated) {
    ql::close_at_box(nodes, box);
    term = Termination::ExitedBox;
  }
  term = apply_stop(nodes, stop, term);
  return to_path(nodes, term);
}

RayPath trace(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg, const WallPlane* stop) {
  return cfg.integrator == Integrator::Nonlinear ? trace_nonlinear(eta, r0, box, cfg, stop)
                                                 : trace_quasilinear(eta, r0, box, cfg, stop);
}

std::optional<WallHit> intersect_wall(const RayPath& path, const WallPlane& wall) {
  std::vector<Node> nodes;
  nodes.reserve(path.samples.size());
  for (const auto& s : path.samples) nodes.push_back(to_node(s.t, s.x, s.v));
  return intersect_wall_nodes<double>(nodes, wall, /*extend_beyond_end=*/false);
}

}  // namespace bos
