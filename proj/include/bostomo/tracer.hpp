#pragma once

#include "bostomo/config.hpp"
#include "bostomo/fields.hpp"
#include "bostomo/scene.hpp"
#include "bostomo/vec_ops.hpp"

#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace bos {

/// Ray state under the Sharma parameterisation: |v| equals the local index.
struct Ray {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::UnitY();

  /// Launches along `dir` with |v| = eta(x).
  static Ray launch(const ScalarField& eta, const Vec3& x, const Vec3& dir);
};

enum class Termination { ExitedBox, HitWall, MaxSteps };

struct PathSample {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct RayPath {
  std::vector<PathSample> samples;
  Termination termination = Termination::ExitedBox;
};

/// Classic RK4 on dx/dt = v, dv/dt = eta grad eta. The final step is clipped to the
/// box face it crosses. `stop` optionally ends the path at its first wall crossing.
RayPath trace_nonlinear(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg,
                        const WallPlane* stop = nullptr);

/// Decoupled scheme: integrate the velocity ODE with eta queried along the straight
/// line x0 + s * v0/|v0|, then integrate positions with that velocity.
RayPath trace_quasilinear(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg,
                          const WallPlane* stop = nullptr);

RayPath trace(const ScalarField& eta, const Ray& r0, const Box& box, const TraceConfig& cfg,
              const WallPlane* stop = nullptr);

template <class S>
struct WallHitT {
  vops::V3<S> x;
  vops::V3<S> v;
  S path_length;
};
using WallHit = WallHitT<double>;

/// First crossing of the wall plane (from its front side) within the wall extent,
/// by linear interpolation inside the crossing segment.
std::optional<WallHit> intersect_wall(const RayPath& path, const WallPlane& wall);

namespace ql {

/// Straight query line of the quasi-linear scheme: `steps` uniform arc-length steps
/// from `origin` along unit `dir`. Query k (0 <= k <= 2 * steps) sits at s = k * ds / 2.
/// The query points depend only on geometry, never on the field.
struct QueryLine {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitY();
  double length = 0.0;
  int steps = 1;
  bool truncated = false;

  double ds() const { return length / steps; }
  int query_count() const { return 2 * steps + 1; }
  Vec3 query_point(int k) const { return origin + (0.5 * k * ds()) * dir; }
};

/// Line from `origin` (inside `box`) to the box exit along `dir`, with steps of at most
/// `step`; at most `max_steps` steps (then truncated).
QueryLine make_query_line(const Vec3& origin, const Vec3& dir, const Box& box, double step, int max_steps);

template <class S>
struct Node {
  S t;
  vops::V3<S> x;
  vops::V3<S> v;
};

/// Runs both passes. `eta` and `force` (= eta grad eta) hold one entry per query point;
/// eta[0] fixes |v0| and hence the parameter step dt = ds / eta[0].
template <class S>
std::vector<Node<S>> integrate(const QueryLine& line, std::span<const S> eta,
                               std::span<const vops::V3<S>> force) {
  using namespace vops;
  const int n = line.steps;
  const S eta0 = eta[0];
  const S h = line.ds() / eta0;
  const V3<S> v0 = scale(from<S>(line.dir), eta0);
  std::vector<V3<S>> v_node(n + 1), v_half(n);
  v_node[0] = v0;
  for (int k = 0; k < n; ++k) {
    const auto& f0 = force[2 * k];
    const auto& fm = force[2 * k + 1];
    const auto& f1 = force[2 * k + 2];
    V3<S> full, half;
    for (int a = 0; a < 3; ++a) {
      full[a] = v_node[k][a] + (h / 6.0) * (f0[a] + 4.0 * fm[a] + f1[a]);
      half[a] = v_node[k][a] + (h / 24.0) * (5.0 * f0[a] + 8.0 * fm[a] - f1[a]);
    }
    v_node[k + 1] = full;
    v_half[k] = half;
  }
  std::vector<Node<S>> nodes(n + 1);
  nodes[0] = {S(0.0), from<S>(line.origin), v0};
  for (int k = 0; k < n; ++k) {
    V3<S> x;
    for (int a = 0; a < 3; ++a)
      x[a] = nodes[k].x[a] + (h / 6.0) * (v_node[k][a] + 4.0 * v_half[k][a] + v_node[k + 1][a]);
    nodes[k + 1] = {h * static_cast<double>(k + 1), x, v_node[k + 1]};
  }
  return nodes;
}

/// Makes the path end on the box surface: clips at the first node found outside the
/// box, or extends the last segment along its velocity until it leaves the box.
template <class S>
void close_at_box(std::vector<Node<S>>& nodes, const Box& box) {
  using namespace vops;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const auto& xk = nodes[k].x;
    bool outside = false;
    for (int a = 0; a < 3; ++a)
      outside = outside || value_of(xk[a]) < box.lo[a] || value_of(xk[a]) > box.hi[a];
    if (!outside) continue;
    const auto& xp = nodes[k - 1].x;
    int axis = -1;
    double face = 0.0;
    double best = 2.0;
    for (int a = 0; a < 3; ++a) {
      const double lo = box.lo[a], hi = box.hi[a];
      const double p = value_of(xp[a]), q = value_of(xk[a]);
      double f = 0.0;
      if (q > hi) f = hi;
      else if (q < lo) f = lo;
      else continue;
      const double alpha = (q - p) != 0.0 ? (f - p) / (q - p) : 0.0;
      if (alpha < best) {
        best = alpha;
        axis = a;
        face = f;
      }
    }
    const S alpha = (face - xp[axis]) / (xk[axis] - xp[axis]);
    Node<S> end{nodes[k - 1].t + alpha * (nodes[k].t - nodes[k - 1].t), lerp(xp, xk, alpha),
                lerp(nodes[k - 1].v, nodes[k].v, alpha)};
    end.x[axis] = S(face);
    nodes.resize(k);
    nodes.push_back(end);
    return;
  }
  const auto& last = nodes.back();
  int axis = -1;
  double face = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double va = value_of(last.v[a]);
    if (va == 0.0) continue;
    const double f = va > 0.0 ? box.hi[a] : box.lo[a];
    const double tau = (f - value_of(last.x[a])) / va;
    if (tau < best) {
      best = tau;
      axis = a;
      face = f;
    }
  }
  if (axis < 0 || !(best > 0.0)) return;
  const S tau = (face - last.x[axis]) / last.v[axis];
  Node<S> end{last.t + tau, axpy(last.x, tau, last.v), last.v};
  nodes.push_back(end);
}

}  // namespace ql

/// Wall crossing on a node sequence; when the nodes end in front of the wall the last
/// segment continues straight along its velocity (homogeneous medium beyond the box).
template <class S>
std::optional<WallHitT<S>> intersect_wall_nodes(std::span<const ql::Node<S>> nodes, const WallPlane& wall,
                                                bool extend_beyond_end = true) {
  using namespace vops;
  using std::sqrt;
  if (nodes.empty()) return std::nullopt;
  auto signed_dist = [&](const V3<S>& x) {
    return (x[0] - wall.point[0]) * wall.normal[0] + (x[1] - wall.point[1]) * wall.normal[1] +
           (x[2] - wall.point[2]) * wall.normal[2];
  };
  auto within_extent = [&](const V3<S>& x) {
    const Vec3 d = to_vec3({value_of(x[0]), value_of(x[1]), value_of(x[2])}) - wall.point;
    return std::abs(d.dot(wall.e1)) <= 0.5 * wall.width && std::abs(d.dot(wall.e2)) <= 0.5 * wall.height;
  };
  S length(0.0);
  S d_prev = signed_dist(nodes[0].x);
  if (!(value_of(d_prev) > 0.0)) return std::nullopt;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const S d_cur = signed_dist(nodes[k].x);
    const V3<S> seg = sub(nodes[k].x, nodes[k - 1].x);
    const S seg_len = norm(seg);
    if (value_of(d_cur) <= 0.0) {
      const S alpha = d_prev / (d_prev - d_cur);
      WallHitT<S> hit{lerp(nodes[k - 1].x, nodes[k].x, alpha), lerp(nodes[k - 1].v, nodes[k].v, alpha),
                      length + alpha * seg_len};
      if (!within_extent(hit.x)) return std::nullopt;
      return hit;
    }
    length = length + seg_len;
    d_prev = d_cur;
  }
  if (!extend_beyond_end) return std::nullopt;
  const auto& last = nodes.back();
  const S approach = dot(last.v, wall.normal);
  if (!(value_of(approach) < 0.0)) return std::nullopt;
  const S tau = -d_prev / approach;
  WallHitT<S> hit{axpy(last.x, tau, last.v), last.v, length + tau * norm(last.v)};
  if (!within_extent(hit.x)) return std::nullopt;
  return hit;
}

}  // namespace bos
