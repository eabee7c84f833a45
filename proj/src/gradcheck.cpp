#include "bostomo/gradcheck.hpp"

#include "bostomo/network.hpp"
#include "bostomo/optim.hpp"
#include "bostomo/pinn.hpp"
#include "bostomo/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace bos {

double richardson_derivative(const std::function<double(double)>& f, double x, double h) {
  auto central = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed(); });
}

namespace {

double second_derivative(const std::function<double(double)>& f, double x, double h) {
  const double f0 = f(x);
  auto d2 = [&](double s) { return (f(x + s) - 2.0 * f0 + f(x - s)) / (s * s); };
  return (4.0 * d2(0.5 * h) - d2(h)) / 3.0;
}

Box shrink(const Box& b, double margin) {
  Box r = b;
  r.lo.array() += margin;
  r.hi.array() -= margin;
  return r;
}

std::vector<std::size_t> pick_coordinates(std::size_t n, int count, std::uint64_t seed) {
  CounterRng rng(seed, 0x434f4f52ULL);
  std::vector<std::size_t> out;
  for (int i = 0; i < count; ++i) out.push_back(static_cast<std::size_t>(rng.below(n)));
  return out;
}

/// Compares analytic parameter gradients against Richardson differences of `loss`.
GradcheckEntry param_check(const std::string& name, NeuralField nf, const std::function<double(const NeuralField&)>& loss,
                           const std::vector<double>& grad, int count, double h, double tol, std::uint64_t seed) {
  GradcheckEntry e{name, 0.0, tol, count};
  const auto coords = pick_coordinates(nf.param_count(), count, seed);
  const double gmax = std::abs(*std::max_element(grad.begin(), grad.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  }));
  const std::vector<double> base(nf.params().begin(), nf.params().end());
  for (std::size_t i : coords) {
    auto f = [&](double v) {
      nf.params()[i] = v;
      const double l = loss(nf);
      nf.params()[i] = base[i];
      return l;
    };
    const double fd = richardson_derivative(f, base[i], h);
    e.max_rel_error = std::max(e.max_rel_error, relative_error(grad[i], fd, 1e-6 * gmax));
  }
  return e;
}

}  // namespace

GradcheckReport run_gradcheck(const Scene& scene, std::uint64_t seed) {
  GradcheckReport rep;
  NetworkConfig net;
  net.hidden = {16, 16, 16};
  net.activation = Activation::Tanh;
  const NeuralField nf(net, scene.room, seed);

  // Spatial derivatives against differences of the scalar forward pass.
  {
    const Box inner = shrink(scene.room, 0.05);
    CounterRng rng(seed, 0x53504154ULL);
    constexpr int n = 50;
    Eigen::Matrix3Xd x(3, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) x(k, i) = rng.uniform(inner.lo[k], inner.hi[k]);
    const JetBatch j = nf.evaluate(x, 2);
    GradcheckEntry jac{"spatial Jacobian", 0.0, 1e-5, 0}, lap{"spatial Laplacian", 0.0, 1e-5, 0};
    // Second differences need a wider step: round-off grows as eps / h^2.
    const double h = 1e-4, h2 = 1e-2;
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < kChannels; ++ch) {
        double lap_fd = 0.0, lap_an = 0.0;
        for (int k = 0; k < 3; ++k) {
          auto f = [&](double v) {
            Vec3 y = x.col(i);
            y[k] = v;
            return nf.forward(y)[ch];
          };
          const double d1 = richardson_derivative(f, x(k, i), h);
          jac.max_rel_error = std::max(jac.max_rel_error, relative_error(j.d1[k](ch, i), d1, 1e-4));
          ++jac.checks;
          lap_fd += second_derivative(f, x(k, i), h2);
          lap_an += j.d2[k](ch, i);
        }
        lap.max_rel_error = std::max(lap.max_rel_error, relative_error(lap_an, lap_fd, 1e-4));
        ++lap.checks;
      }
    rep.entries.push_back(jac);
    rep.entries.push_back(lap);
  }

  // Parameter gradients of the PDE and boundary losses.
  {
    const Eigen::Matrix3Xd colloc = sample_collocation(scene.room, 64, seed, 0);
    BoundarySamples bs;
    bs.x = sample_boundary_points(boundary_rect(scene), 32, seed, 0);
    bs.ref.resize(kChannels, bs.x.cols());
    CounterRng rng(seed, 0x52454600ULL);
    for (Eigen::Index i = 0; i < bs.ref.size(); ++i) bs.ref.data()[i] = rng.uniform(-1.0, 1.0);
    const BoundaryScales scales{1.0, 1.0, 1.5};
    LossWeights w;
    w.gamma_mass = 1.0;
    w.gamma_mom = 0.5;
    w.gamma_heat = 2.0;
    auto loss = [&](const NeuralField& f) {
      return loss_pde(f, colloc, w, scene.nondim) +
             loss_boundary(f, bs, scales, BoundaryNormalization::ReferenceMax);
    };
    std::vector<double> g(nf.param_count(), 0.0);
    loss_pde(nf, colloc, w, scene.nondim, g);
    loss_boundary(nf, bs, scales, BoundaryNormalization::ReferenceMax, g);
    rep.entries.push_back(param_check("parameter gradient (PDE + boundary)", nf, loss, g, 20, 1e-3, 1e-5, seed));
  }

  // BOS loss through the quasi-linear renderer.
  {
    const std::vector<PixelIndex> pixels = sample_pixels(scene.camera, 10, seed, 0);
    Image meas;
    meas.rows = scene.camera.rows;
    meas.cols = scene.camera.cols;
    meas.data.assign(static_cast<std::size_t>(meas.rows) * meas.cols, 0.0);
    const ConstantField ambient(scene.ambient_eta());
    Scene s = scene;
    s.trace.step = 0.1;
    for (const auto& p : pixels) meas.at(p.row, p.col) = render_pixel(s, ambient, p, 2, seed);
    const BosProblem prob{&scene, &meas, 2, seed, 0.1};
    auto loss = [&](const NeuralField& f) { return loss_bos(f, prob, pixels); };
    std::vector<double> g(nf.param_count(), 0.0);
    loss_bos(nf, prob, pixels, g);
    rep.entries.push_back(param_check("BOS gradient through renderer", nf, loss, g, 5, 1e-4, 1e-3, seed + 1));
  }
  return rep;
}

}  // namespace bos
