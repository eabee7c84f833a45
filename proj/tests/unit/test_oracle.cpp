#include "support.hpp"

#include "bostomo/oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace bos;

namespace {

PlumeConfig plume_at(const Vec3& c, double sigma = 0.3, double dT = 30.0, double w0 = 0.5) {
  PlumeConfig p;
  p.center = c;
  p.sigma = sigma;
  p.delta_T = dT;
  p.w0 = w0;
  return p;
}

}  // namespace

TEST_CASE("plume temperature: peak and Gaussian fall-off") {
  const MediumConstants m;
  const NondimConstants c;
  const PlumeConfig cfg = plume_at(Vec3(0.8, 0.0, 1.5), 0.5, 30.0, 1.0);
  const AnalyticFlow f = gaussian_plume(cfg, m, c);
  CHECK(f.T(cfg.center) == doctest::Approx(m.T0 + 30.0).epsilon(1e-15));
  const double excess = f.T(cfg.center + Vec3(1.5, 0.0, 0.0)) - m.T0;
  CHECK(excess / 30.0 == doctest::Approx(std::exp(-4.5)).epsilon(1e-12));
  CHECK(excess / 30.0 < 0.012);
  // Updraft along -e_g, constant along the axis, Gaussian across it.
  CHECK((f.u(cfg.center + Vec3(0, 0, 0.7)) - Vec3(0, 0, 1.0)).norm() < 1e-15);
  CHECK(f.u(cfg.center + Vec3(0.5, 0, 0)).z() == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("plume pressure balances buoyancy along gravity") {
  const MediumConstants m;
  NondimConstants c;
  c.Ri = 1.7;
  c.L = 1.3;
  const AnalyticFlow f = gaussian_plume(plume_at(Vec3(0.5, 0.2, 1.0)), m, c);
  CounterRng rng(4, 0);
  for (int n = 0; n < 20; ++n) {
    const Vec3 x(rng.uniform(-1, 2), rng.uniform(-1, 1), rng.uniform(0, 2.5));
    const double h = 1e-4;
    const double dpdz = (f.p(x + Vec3(0, 0, h)) - f.p(x - Vec3(0, 0, h))) / (2 * h);
    const double T_nd = m.nondim_temperature(f.T(x));
    CHECK(dpdz == doctest::Approx(c.Ri * T_nd / c.L).epsilon(1e-6).scale(1e-9));
    // Vertical momentum residual loses its buoyancy and pressure terms; divergence is zero.
    const ResidualTriple r = fd_residuals(f, x, m, c, 1e-3);
    CHECK(std::abs(r.mass) < 1e-9);
  }
}

TEST_CASE("analytic derivative closures agree with finite differences") {
  const MediumConstants m;
  const NondimConstants c;
  const Box box{Vec3(-1.2, -2, 0), Vec3(2.9, 2, 3)};
  CHECK(derivative_mismatch(gaussian_plume(plume_at(Vec3(0.8, 0, 1.5), 0.5), m, c), box, 200, 3) < 1e-6);
  CHECK_NOTHROW(verify_derivatives(gaussian_plume(plume_at(Vec3(0.1, 0.3, 1.0)), m, c), box));
  CHECK_NOTHROW(verify_derivatives(ambient_flow(m), box));

  AnalyticFlow broken = gaussian_plume(plume_at(Vec3(0.8, 0, 1.5)), m, c);
  broken.grad_T = [](const Vec3&) { return Vec3(1.0, 0.0, 0.0); };
  CHECK_THROWS(verify_derivatives(broken, box));
}

TEST_CASE("ambient flow is a rest state") {
  const MediumConstants m;
  const NondimConstants c;
  const AnalyticFlow f = ambient_flow(m);
  const ResidualTriple r = fd_residuals(f, Vec3(0.3, 0.1, 1.2), m, c);
  CHECK(r.mass == 0.0);
  CHECK(r.heat == 0.0);
  for (double v : r.mom) CHECK(v == 0.0);
  const FlowState s = truth_state(f, Vec3(0, 0, 1), m, c);
  CHECK(s.T_nd == 0.0);
  CHECK(s.u.norm() == 0.0);
}

TEST_CASE("zero temperature excess gives identical reference and flow images") {
  const Scene s = testing::small_scene();
  const AnalyticFlow f = gaussian_plume(plume_at(Vec3(0, 0, 1), 0.3, 0.0), s.medium, s.nondim);
  const Measurement meas = synthesize_measurement(s, f, 2, 9, 0.05);
  CHECK(meas.ref.data == meas.flow.data);
}

TEST_CASE("a compact plume changes only the pixels that look through it") {
  Scene s = testing::small_scene();
  s.wall.texture = make_noise_texture(5, 64, 1.0, 4.0);
  const AnalyticFlow f = gaussian_plume(plume_at(Vec3(0.5, 0, 1), 0.12, 40.0), s.medium, s.nondim);
  const Measurement meas = synthesize_measurement(s, f, 2, 9, 0.02);
  double near = 0.0, far = 0.0;
  for (int r = 0; r < meas.ref.rows; ++r)
    for (int col = 0; col < meas.ref.cols; ++col) {
      const double d = std::abs(meas.flow.at(r, col) - meas.ref.at(r, col));
      // Columns 0..5 image x < -0.25 m on the plume's depth plane.
      (col <= 5 ? far : near) += d;
    }
  CHECK(near > 0.0);
  CHECK(far < 1e-3 * near);
}

TEST_CASE("metrics: identical fields score zero") {
  const Scene s = testing::small_scene();
  const AnalyticFlow f = gaussian_plume(plume_at(Vec3(0.2, 0, 1)), s.medium, s.nondim);
  const Metrics mt =
      evaluate([&](const Vec3& x) { return truth_state(f, x, s.medium, s.nondim); }, f, s, 8);
  CHECK(mt.T.rmse == 0.0);
  CHECK(mt.p.rmse == 0.0);
  CHECK(mt.u.rmse == 0.0);
  CHECK(mt.T.max_abs == 0.0);
}

TEST_CASE("metrics: ambient prediction against a plume") {
  const Scene s = testing::small_scene();
  const PlumeConfig cfg = plume_at(Vec3(0.2, -0.1, 1.1), 0.4, 25.0, 0.8);
  const AnalyticFlow f = gaussian_plume(cfg, s.medium, s.nondim);
  const int n = 9;
  const Metrics mt = evaluate([](const Vec3&) { return FlowState{}; }, f, s, n);
  double sT = 0.0, su = 0.0, mT = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 x = s.room.lo + Vec3(i, j, k).cwiseProduct(s.room.extent()) / (n - 1);
        const double dT = 25.0 * std::exp(-(x - cfg.center).squaredNorm() / (2 * 0.16));
        const double r2 = std::pow(x.x() - cfg.center.x(), 2) + std::pow(x.y() - cfg.center.y(), 2);
        const double w = 0.8 * std::exp(-r2 / (2 * 0.16));
        sT += dT * dT;
        su += w * w;
        mT = std::max(mT, dT);
      }
  CHECK(mt.T.rmse == doctest::Approx(std::sqrt(sT / (n * n * n))).epsilon(1e-12));
  CHECK(mt.u.rmse == doctest::Approx(std::sqrt(su / (n * n * n))).epsilon(1e-12));
  CHECK(mt.T.max_abs == doctest::Approx(mT).epsilon(1e-12));
  CHECK(mt.T.nrmse == doctest::Approx(mt.T.rmse / mT).epsilon(1e-12));
}

TEST_CASE("metrics are invariant to a joint permutation of the points") {
  const MediumConstants m;
  std::vector<FlowState> a(50), b(50);
  CounterRng rng(6, 0);
  for (int i = 0; i < 50; ++i) {
    a[i] = {rng.uniform(0, 1), rng.uniform(-1, 1), Vec3(rng.uniform(-1, 1), 0.2, rng.uniform(0, 1))};
    b[i] = {rng.uniform(0, 1), rng.uniform(-1, 1), Vec3(0.1, rng.uniform(-1, 1), 0.3)};
  }
  const Metrics m1 = evaluate(a, b, m);
  std::vector<int> perm(50);
  for (int i = 0; i < 50; ++i) perm[i] = (i * 17) % 50;
  std::vector<FlowState> pa(50), pb(50);
  for (int i = 0; i < 50; ++i) {
    pa[i] = a[perm[i]];
    pb[i] = b[perm[i]];
  }
  const Metrics m2 = evaluate(pa, pb, m);
  CHECK(m2.T.rmse == doctest::Approx(m1.T.rmse).epsilon(1e-14));
  CHECK(m2.p.rmse == doctest::Approx(m1.p.rmse).epsilon(1e-14));
  CHECK(m2.u.rmse == doctest::Approx(m1.u.rmse).epsilon(1e-14));
  CHECK(m2.u.max_abs == m1.u.max_abs);
  CHECK_THROWS(evaluate(a, std::vector<FlowState>(3), m));
}

TEST_CASE("boundary grid brackets the plane and holds the flow channels") {
  const Scene s = testing::small_scene();
  const AnalyticFlow f = gaussian_plume(plume_at(Vec3(-0.8, 0, 1)), s.medium, s.nondim);
  const VoxelGrid g = boundary_grid(s, f, 16);
  CHECK(g.dims == std::array<int, 3>{2, 16, 16});
  CHECK(g.channels == kChannels);
  CHECK(g.bbox.lo.x() == -1.0);
  const Vec3 x = g.node(0, 7, 9);
  CHECK(g.at(0, 7, 9, 0) == doctest::Approx(f.T(x)).epsilon(1e-15));
  CHECK(g.at(0, 7, 9, 4) == doctest::Approx(f.u(x).z() / s.nondim.U).epsilon(1e-15));
  const BoundaryReference ref = make_boundary_reference(g, s, 0.0);
  CHECK(ref.scales.T == doctest::Approx(s.medium.nondim_temperature(f.T(Vec3(-1, 0, 1)))).epsilon(0.05));
}

TEST_CASE("regime profiles") {
  LossWeights w;
  w.lambda_bos = 3.0;
  w.lambda_boundary = 2.0;
  w.lambda_pde = 5.0;
  const auto r = regime_profiles(w);
  REQUIRE(r.size() == 3);
  CHECK(r[0].second.lambda_pde == 0.0);
  CHECK(r[0].second.lambda_bos == 3.0);
  CHECK(r[1].second.lambda_bos == 0.0);
  CHECK(r[1].second.lambda_pde == 5.0);
  CHECK(r[2].second == w);
  for (const auto& [name, lw] : r) CHECK(lw.lambda_boundary == 2.0);
}

TEST_CASE("flow grid of a network matches its forward pass") {
  const Scene s = testing::small_scene();
  NetworkConfig cfg;
  cfg.hidden = {5};
  const NeuralField nf(cfg, s.room, 2);
  const VoxelGrid g = flow_grid(s, nf, 4);
  const auto y = nf.forward(g.node(1, 2, 3));
  CHECK(g.at(1, 2, 3, 0) == doctest::Approx(s.medium.temperature(y[kT])).epsilon(1e-14));
  CHECK(g.at(1, 2, 3, 1) == doctest::Approx(y[kP]).epsilon(1e-14));
  CHECK(g.at(1, 2, 3, 3) == doctest::Approx(y[kUy] * s.nondim.U).epsilon(1e-14));
}
