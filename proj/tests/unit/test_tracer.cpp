#include "bostomo/tracer.hpp"

#include <doctest.h>

#include <cmath>

using namespace bos;

namespace {

WallPlane wall_at_y(double y) {
  WallPlane w;
  w.point = Vec3(0.0, y, 0.0);
  w.normal = -Vec3::UnitY();
  w.e1 = Vec3::UnitX();
  w.e2 = Vec3::UnitZ();
  w.width = 4.0;
  w.height = 4.0;
  return w;
}

AnalyticField linear_x(double k) {
  return AnalyticField([k](const Vec3& x) { return 1.0 + k * x.x(); }, [k](const Vec3&) { return Vec3(k, 0.0, 0.0); });
}

TraceConfig cfg_with(Integrator i, double step = 0.01) {
  TraceConfig c;
  c.step = step;
  c.integrator = i;
  return c;
}

const Box kBox{Vec3(-1.0, -0.5, -1.0), Vec3(1.0, 4.0, 1.0)};

}  // namespace

TEST_CASE("uniform index gives a straight path that exits the box with v unchanged") {
  const ConstantField eta(1.0);
  const Ray r0 = Ray::launch(eta, Vec3::Zero(), Vec3::UnitY());
  const RayPath p = trace_nonlinear(eta, r0, kBox, cfg_with(Integrator::Nonlinear));
  CHECK(p.termination == Termination::ExitedBox);
  const auto& end = p.samples.back();
  CHECK(end.x.y() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::abs(end.x.x()) < 1e-15);
  CHECK((end.v - Vec3::UnitY()).norm() < 1e-15);
}

TEST_CASE("launch sets |v| to the local index") {
  const ConstantField eta(1.0003);
  const Ray r = Ray::launch(eta, Vec3::Zero(), Vec3(1, 1, 0));
  CHECK(r.v.norm() == doctest::Approx(1.0003).epsilon(1e-15));
}

TEST_CASE("constant gradient bends the ray along the closed-form parabola") {
  const double k = 1e-4;
  const auto eta = linear_x(k);
  const WallPlane wall = wall_at_y(3.0);
  const Ray r0 = Ray::launch(eta, Vec3::Zero(), Vec3::UnitY());
  const RayPath p = trace_nonlinear(eta, r0, kBox, cfg_with(Integrator::Nonlinear), &wall);
  const auto hit = intersect_wall(p, wall);
  REQUIRE(hit.has_value());
  // dv/dt = eta * k with v_y = 1: x(t) = (cosh(k t) - 1) / k.
  const double exact = (std::cosh(k * 3.0) - 1.0) / k;
  CHECK(exact == doctest::Approx(4.5e-4).epsilon(1e-6));
  CHECK(vops::to_vec3(hit->x).x() == doctest::Approx(exact).epsilon(1e-6));
  CHECK(vops::to_vec3(hit->x).y() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("quasi-linear equals nonlinear when the index is uniform") {
  const ConstantField eta(1.00027);
  const Ray r0 = Ray::launch(eta, Vec3(0.1, 0.0, -0.2), Vec3(0.05, 1.0, 0.02).normalized());
  const RayPath a = trace_nonlinear(eta, r0, kBox, cfg_with(Integrator::Nonlinear));
  const RayPath b = trace_quasilinear(eta, r0, kBox, cfg_with(Integrator::Quasilinear));
  CHECK((a.samples.back().x - b.samples.back().x).norm() < 1e-12);
  // Exactly straight.
  const Vec3 d = r0.v.normalized();
  for (const auto& s : b.samples) CHECK(((s.x - r0.x) - (s.x - r0.x).dot(d) * d).norm() < 1e-12);
}

TEST_CASE("quasi-linear stays within 1% of the nonlinear deflection for a constant gradient") {
  const auto eta = linear_x(1e-4);
  const WallPlane wall = wall_at_y(3.0);
  const Ray r0 = Ray::launch(eta, Vec3::Zero(), Vec3::UnitY());
  const auto a = intersect_wall(trace_nonlinear(eta, r0, kBox, cfg_with(Integrator::Nonlinear), &wall), wall);
  const auto b = intersect_wall(trace_quasilinear(eta, r0, kBox, cfg_with(Integrator::Quasilinear), &wall), wall);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(std::abs(vops::to_vec3(a->x).x() - vops::to_vec3(b->x).x()) < 0.01 * std::abs(vops::to_vec3(a->x).x()));
}

TEST_CASE("quasi-linear misses index structure away from the straight line") {
  // A constant gradient deflects both paths; a compact bump sits where the true path goes
  // but entirely off the straight query line.
  const double g = 0.02, y_b = 2.5, w = 0.03, x_b = 0.5 * g * y_b * y_b + 0.5 * w, c = 5e-3;
  auto bump = [=](const Vec3& x) {
    const double r2 = (x.x() - x_b) * (x.x() - x_b) + (x.y() - y_b) * (x.y() - y_b);
    return r2 < w * w ? std::pow(1.0 - r2 / (w * w), 3) : 0.0;
  };
  auto bump_grad = [=](const Vec3& x) {
    const double r2 = (x.x() - x_b) * (x.x() - x_b) + (x.y() - y_b) * (x.y() - y_b);
    if (r2 >= w * w) return Vec3::Zero().eval();
    const double s = -6.0 / (w * w) * std::pow(1.0 - r2 / (w * w), 2);
    return Vec3(s * (x.x() - x_b), s * (x.y() - y_b), 0.0);
  };
  const AnalyticField with_bump([=](const Vec3& x) { return 1.0 + g * x.x() + c * bump(x); },
                                [=](const Vec3& x) { return (Vec3(g, 0, 0) + c * bump_grad(x)).eval(); });
  const auto plain = linear_x(g);
  const WallPlane wall = wall_at_y(3.5);
  const Ray r0 = Ray::launch(plain, Vec3::Zero(), Vec3::UnitY());
  auto end = [&](const ScalarField& f, Integrator i) {
    return vops::to_vec3(intersect_wall(trace(f, r0, kBox, cfg_with(i), &wall), wall)->x);
  };
  const Vec3 ql_bump = end(with_bump, Integrator::Quasilinear);
  const Vec3 ql_plain = end(plain, Integrator::Quasilinear);
  const Vec3 nl_bump = end(with_bump, Integrator::Nonlinear);
  const Vec3 nl_plain = end(plain, Integrator::Nonlinear);
  CHECK((ql_bump - ql_plain).norm() == 0.0);
  CHECK((nl_bump - nl_plain).norm() > 1e-4);
}

TEST_CASE("nonlinear paths keep |v| equal to the index") {
  const AnalyticField eta(
      [](const Vec3& x) { return 1.0 + 2.7e-4 * (1.0 + 0.3 * std::sin(2.0 * x.x() + x.y()) * std::cos(1.5 * x.z())); },
      [](const Vec3& x) {
        const double s = std::sin(2.0 * x.x() + x.y()), c = std::cos(2.0 * x.x() + x.y());
        const double cz = std::cos(1.5 * x.z()), sz = std::sin(1.5 * x.z());
        return Vec3(2.7e-4 * 0.3 * 2.0 * c * cz, 2.7e-4 * 0.3 * c * cz, -2.7e-4 * 0.3 * 1.5 * s * sz);
      });
  const Ray r0 = Ray::launch(eta, Vec3(0.0, 0.0, 0.2), Vec3(0.1, 1.0, 0.05).normalized());
  const RayPath p = trace_nonlinear(eta, r0, Box{Vec3(-1, -0.5, -1), Vec3(1, 3.0, 1)}, cfg_with(Integrator::Nonlinear));
  double worst = 0.0;
  for (const auto& s : p.samples) worst = std::max(worst, std::abs(s.v.norm() - eta.value(s.x)));
  CHECK(worst < 1e-8);
}

TEST_CASE("max_steps terminates the path") {
  const ConstantField eta(1.0);
  TraceConfig c = cfg_with(Integrator::Nonlinear);
  c.max_steps = 10;
  const RayPath p = trace_nonlinear(eta, Ray::launch(eta, Vec3::Zero(), Vec3::UnitY()), kBox, c);
  CHECK(p.termination == Termination::MaxSteps);
  CHECK(p.samples.size() == 11);
}

TEST_CASE("wall intersection of a straight ray") {
  const ConstantField eta(1.0);
  const Box box{Vec3(-1, -4, -1), Vec3(1, 1, 1)};
  const WallPlane wall = wall_at_y(0.0);
  const RayPath p =
      trace_nonlinear(eta, Ray::launch(eta, Vec3(0, -3, 0), Vec3::UnitY()), box, cfg_with(Integrator::Nonlinear, 0.07));
  const auto hit = intersect_wall(p, wall);
  REQUIRE(hit.has_value());
  CHECK(vops::to_vec3(hit->x).norm() < 1e-12);
  CHECK(hit->path_length == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("ray parallel to the wall misses") {
  const ConstantField eta(1.0);
  const Box box{Vec3(-1, -4, -1), Vec3(1, 1, 1)};
  const RayPath p =
      trace_nonlinear(eta, Ray::launch(eta, Vec3(-0.9, -2, 0), Vec3::UnitX()), box, cfg_with(Integrator::Nonlinear));
  CHECK_FALSE(intersect_wall(p, wall_at_y(0.0)).has_value());
}

TEST_CASE("query line spans the box with 2n+1 arc-length queries") {
  const auto line = ql::make_query_line(Vec3(0, -0.5, 0), Vec3::UnitY(), kBox, 0.4, 1000);
  CHECK(line.length == doctest::Approx(4.5));
  CHECK(line.ds() <= 0.4 + 1e-12);
  CHECK(line.query_point(line.query_count() - 1).y() == doctest::Approx(4.0));
}
