#include "support.hpp"

#include "bostomo/jet.hpp"
#include "bostomo/network.hpp"
#include "bostomo/pinn.hpp"
#include "bostomo/tape.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace bos;

namespace {

double central(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

NeuralField small_net(std::uint64_t seed, Activation act = Activation::Tanh, int fourier = 0) {
  NetworkConfig cfg;
  cfg.hidden = {8, 8};
  cfg.activation = act;
  cfg.fourier_features = fourier;
  return NeuralField(cfg, Box{Vec3(-1, -1, 0), Vec3(1, 1, 2)}, seed);
}

Eigen::Matrix3Xd points_in(const Box& b, int n, std::uint64_t seed) {
  Eigen::Matrix3Xd x(3, n);
  CounterRng rng(seed, 0);
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < 3; ++a) x(a, j) = rng.uniform(b.lo[a] + 0.05, b.hi[a] - 0.05);
  return x;
}

}  // namespace

TEST_CASE("gradient of the squared norm is twice the input") {
  Tape t;
  std::vector<Var> th;
  const std::vector<double> vals{0.3, -1.2, 2.5, 0.0};
  for (double v : vals) th.push_back(t.leaf(v));
  Var s = 0.0;
  for (const Var& v : th) s += v * v;
  const auto g = t.leaf_gradient(s);
  for (std::size_t i = 0; i < vals.size(); ++i) CHECK(g[i] == 2 * vals[i]);
}

TEST_CASE("detached values carry no gradient") {
  Tape t;
  const Var x = t.leaf(1.5);
  const Var y = detach(x) * detach(x) + 3.0;
  CHECK(y.is_constant());
  const Var z = x * detach(x);
  CHECK(t.leaf_gradient(z)[0] == 1.5);
}

TEST_CASE("every tape operation matches a finite difference") {
  using Un = std::function<Var(const Var&)>;
  using Fn = std::function<double(double)>;
  const std::vector<std::pair<Un, Fn>> unary = {
      {[](const Var& a) { return sqrt(a); }, [](double a) { return std::sqrt(a); }},
      {[](const Var& a) { return exp(a); }, [](double a) { return std::exp(a); }},
      {[](const Var& a) { return log(a); }, [](double a) { return std::log(a); }},
      {[](const Var& a) { return tanh(a); }, [](double a) { return std::tanh(a); }},
      {[](const Var& a) { return sin(a); }, [](double a) { return std::sin(a); }},
      {[](const Var& a) { return cos(a); }, [](double a) { return std::cos(a); }},
      {[](const Var& a) { return square(a); }, [](double a) { return a * a; }},
      {[](const Var& a) { return -a; }, [](double a) { return -a; }},
      {[](const Var& a) { return a + 2.0; }, [](double a) { return a + 2.0; }},
      {[](const Var& a) { return 2.0 - a; }, [](double a) { return 2.0 - a; }},
      {[](const Var& a) { return a * 3.0; }, [](double a) { return a * 3.0; }},
      {[](const Var& a) { return a / 3.0; }, [](double a) { return a / 3.0; }},
      {[](const Var& a) { return 3.0 / a; }, [](double a) { return 3.0 / a; }},
  };
  for (double x0 : {0.4, 1.3}) {
    for (const auto& [op, ref] : unary) {
      Tape t;
      const Var x = t.leaf(x0);
      const Var y = op(x);
      CHECK(y.value() == doctest::Approx(ref(x0)).epsilon(1e-15));
      CHECK(t.leaf_gradient(y)[0] == doctest::Approx(central(ref, x0)).epsilon(1e-7));
    }
  }
  using Bin = std::function<Var(const Var&, const Var&)>;
  const std::vector<Bin> binary = {
      [](const Var& a, const Var& b) { return a + b; }, [](const Var& a, const Var& b) { return a - b; },
      [](const Var& a, const Var& b) { return a * b; }, [](const Var& a, const Var& b) { return a / b; }};
  for (const auto& op : binary) {
    Tape t;
    const Var a = t.leaf(0.7), b = t.leaf(-1.9);
    const auto g = t.leaf_gradient(op(a, b));
    CHECK(g[0] == doctest::Approx(central([&](double s) { return op(Var(s), Var(-1.9)).value(); }, 0.7)).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(central([&](double s) { return op(Var(0.7), Var(s)).value(); }, -1.9)).epsilon(1e-7));
  }
}

TEST_CASE("replaying a tape with new leaves reproduces direct evaluation") {
  auto f = [](const auto& x, const auto& y) { return sin(x * y) + exp(x) / y - tanh(y * y); };
  Tape t;
  const Var x = t.leaf(0.2), y = t.leaf(1.1);
  const Var out = f(x, y);
  const std::vector<double> next{-0.6, 2.4};
  CHECK(t.replay(next, out) == doctest::Approx(f(Var(-0.6), Var(2.4)).value()).epsilon(1e-15));
  const auto g = t.leaf_gradient(out);
  CHECK(g[0] == doctest::Approx(central([&](double s) { return f(Var(s), Var(2.4)).value(); }, -0.6)).epsilon(1e-7));
}

TEST_CASE("jet of x1^2 x2 + x3^3 at (1, 2, 3)") {
  const Jet f = spatial_jet([](const std::array<Jet, 3>& x) { return x[0] * x[0] * x[1] + x[2] * x[2] * x[2]; },
                            Vec3(1, 2, 3));
  CHECK(f.v == 29.0);
  CHECK(f.d[0] == 4.0);
  CHECK(f.d[1] == 1.0);
  CHECK(f.d[2] == 27.0);
  CHECK(f.dd[0] + f.dd[1] + f.dd[2] == 22.0);
  const Jet g = spatial_jet([](const std::array<Jet, 3>& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; },
                            Vec3(0.3, -0.1, 7.0));
  CHECK(g.dd[0] + g.dd[1] + g.dd[2] == 6.0);
}

TEST_CASE("jet elementary functions against finite differences") {
  const Vec3 x0(0.3, 0.7, 1.1);
  auto f = [](const auto& x) { return exp(sin(x[0]) * x[1]) / sqrt(x[2] + 1.0) + log(x[1]) * tanh(x[0] - x[2]) - cos(x[2]); };
  const Jet j = spatial_jet([&](const std::array<Jet, 3>& x) { return f(x); }, x0);
  auto fd = [&](const Vec3& x) { return f(std::array<double, 3>{x[0], x[1], x[2]}); };
  CHECK(j.v == doctest::Approx(fd(x0)).epsilon(1e-15));
  for (int k = 0; k < 3; ++k) {
    const double h = 1e-4;
    Vec3 p = x0, m = x0;
    p[k] += h;
    m[k] -= h;
    CHECK(j.d[k] == doctest::Approx((fd(p) - fd(m)) / (2 * h)).epsilon(1e-7));
    CHECK(j.dd[k] == doctest::Approx((fd(p) - 2 * fd(x0) + fd(m)) / (h * h)).epsilon(1e-5));
  }
}

TEST_CASE("identity-activation affine network: Jacobian W, Laplacian 0") {
  const NeuralField nf = small_net(4, Activation::Identity);
  // Composite affine map in normalized coordinates; recover its matrix from unit probes.
  const Box& room = nf.room();
  const Eigen::Matrix3Xd x = points_in(room, 10, 8);
  const JetBatch out = nf.evaluate(x, 2);
  const Vec3 c = room.center();
  const auto base = nf.forward(c);
  for (int k = 0; k < 3; ++k) {
    Vec3 e = c;
    e[k] += 0.25;
    const auto slope = ((nf.forward(e) - base) / 0.25).eval();
    for (int j = 0; j < x.cols(); ++j)
      for (int ch = 0; ch < kChannels; ++ch) {
        CHECK(out.d1[k](ch, j) == doctest::Approx(slope[ch]).epsilon(1e-10));
        CHECK(std::abs(out.d2[k](ch, j)) < 1e-13);
      }
  }
}

TEST_CASE("batched network jets agree with finite differences of the scalar path") {
  for (int fourier : {0, 4}) {
    const NeuralField nf = small_net(5, Activation::Tanh, fourier);
    const Eigen::Matrix3Xd x = points_in(nf.room(), 20, 9);
    const JetBatch out = nf.evaluate(x, 2);
    for (int j = 0; j < x.cols(); ++j) {
      const Vec3 x0 = x.col(j);
      const auto f0 = nf.forward(x0);
      for (int ch = 0; ch < kChannels; ++ch) CHECK(out.value(ch, j) == doctest::Approx(f0[ch]).epsilon(1e-13));
      for (int k = 0; k < 3; ++k) {
        const double h = 1e-4;
        Vec3 p = x0, m = x0;
        p[k] += h;
        m[k] -= h;
        const auto fp = nf.forward(p), fm = nf.forward(m);
        Vec3 p1 = x0, m1 = x0;
        p1[k] += 0.1 * h;
        m1[k] -= 0.1 * h;
        const auto fp1 = nf.forward(p1), fm1 = nf.forward(m1);
        for (int ch = 0; ch < kChannels; ++ch) {
          CHECK(std::abs(out.d1[k](ch, j) - (fp1[ch] - fm1[ch]) / (0.2 * h)) < 1e-6);
          CHECK(std::abs(out.d2[k](ch, j) - (fp[ch] - 2 * f0[ch] + fm[ch]) / (h * h)) < 1e-3);
        }
      }
    }
  }
}

TEST_CASE("network backward matches finite differences in the parameters") {
  NeuralField nf = small_net(6, Activation::Tanh, 2);
  const Eigen::Matrix3Xd x = points_in(nf.room(), 300, 10);  // spans two chunks
  JetBatch adj = JetBatch::zeros(2, kChannels, x.cols());
  CounterRng rng(11, 0);
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  };
  fill(adj.value);
  for (int k = 0; k < 3; ++k) {
    fill(adj.d1[k]);
    fill(adj.d2[k]);
  }
  auto objective = [&](const NeuralField& n) {
    const JetBatch o = n.evaluate(x, 2);
    double s = adj.value.cwiseProduct(o.value).sum();
    for (int k = 0; k < 3; ++k) s += adj.d1[k].cwiseProduct(o.d1[k]).sum() + adj.d2[k].cwiseProduct(o.d2[k]).sum();
    return s;
  };
  NeuralField::ForwardCache cache;
  nf.evaluate(x, 2, &cache);
  std::vector<double> grad(nf.param_count(), 0.0);
  nf.backward(cache, adj, grad);
  for (std::size_t i = 0; i < nf.param_count(); i += 7) {
    const double p0 = nf.params()[i], h = 1e-5;
    nf.params()[i] = p0 + h;
    const double fp = objective(nf);
    nf.params()[i] = p0 - h;
    const double fm = objective(nf);
    nf.params()[i] = p0;
    const double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(grad[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("BOS gradient vanishes when the network reproduces the measurement") {
  const Scene s = testing::small_scene();
  NetworkConfig cfg;
  cfg.hidden = {8};
  NeuralField nf(cfg, s.room, 3);
  std::fill(nf.params().begin(), nf.params().end(), 0.0);
  const Image meas = render_image_neural(nf, s, 2, 5, 0.1);
  const BosProblem prob{&s, &meas, 2, 5, 0.1};
  const std::vector<PixelIndex> px{{0, 0}, {5, 7}, {15, 15}, {8, 3}};
  std::vector<double> grad(nf.param_count(), 0.0);
  CHECK(loss_bos(nf, prob, px, grad) == 0.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("a small step against the BOS gradient lowers the loss") {
  const Scene s = testing::small_scene();
  NetworkConfig cfg;
  cfg.hidden = {8};
  NeuralField truth(cfg, s.room, 3);
  for (double& p : truth.params()) p *= 4.0;
  const Image meas = render_image_neural(truth, s, 2, 5, 0.1);
  NeuralField nf(cfg, s.room, 4);
  const BosProblem prob{&s, &meas, 2, 5, 0.1};
  std::vector<PixelIndex> px;
  for (int r = 0; r < 16; r += 3)
    for (int c = 0; c < 16; c += 3) px.push_back({r, c});
  std::vector<double> grad(nf.param_count(), 0.0);
  const double l0 = loss_bos(nf, prob, px, grad);
  REQUIRE(l0 > 0.0);
  double gn = 0.0;
  for (double g : grad) gn += g * g;
  const double eps = 1e-3 * l0 / gn;
  for (std::size_t i = 0; i < grad.size(); ++i) nf.params()[i] -= eps * grad[i];
  CHECK(loss_bos(nf, prob, px) < l0);
}
