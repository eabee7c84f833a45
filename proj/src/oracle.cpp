#include "bostomo/oracle.hpp"

#include "bostomo/io.hpp"
#include "bostomo/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

namespace bos {

namespace fs = std::filesystem;

AnalyticFlow ambient_flow(const MediumConstants& m) {
  AnalyticFlow f;
  const double T0 = m.T0;
  f.T = [T0](const Vec3&) { return T0; };
  f.grad_T = [](const Vec3&) { return Vec3::Zero().eval(); };
  f.p = [](const Vec3&) { return 0.0; };
  f.grad_p = [](const Vec3&) { return Vec3::Zero().eval(); };
  f.u = [](const Vec3&) { return Vec3::Zero().eval(); };
  f.jac_u = [](const Vec3&) { return Eigen::Matrix3d::Zero().eval(); };
  return f;
}

AnalyticFlow gaussian_plume(const PlumeConfig& cfg, const MediumConstants& m, const NondimConstants& c) {
  if (!(cfg.sigma > 0.0)) throw ValidationError("plume sigma must be > 0");
  const Vec3 center = cfg.center;
  const double sigma = cfg.sigma, dT = cfg.delta_T, w0 = cfg.w0, T0 = m.T0;
  const Vec3 up = -c.e_g.normalized();
  // Pressure in x_hat = x / L: p = K exp(-r_perp^2 / 2 s^2) erf(zeta / (sqrt(2) s)).
  const double L = c.L, s = sigma / L;
  const double A = dT / m.delta_T();
  const double K = c.Ri * A * s * std::sqrt(std::numbers::pi / 2.0);
  AnalyticFlow f;
  f.T = [=](const Vec3& x) { return T0 + dT * std::exp(-(x - center).squaredNorm() / (2.0 * sigma * sigma)); };
  f.grad_T = [=](const Vec3& x) {
    const Vec3 d = x - center;
    return Vec3(-dT * std::exp(-d.squaredNorm() / (2.0 * sigma * sigma)) / (sigma * sigma) * d);
  };
  auto perp = [=](const Vec3& x) {
    const Vec3 d = x - center;
    return Vec3(d - d.dot(up) * up);
  };
  f.u = [=](const Vec3& x) {
    const Vec3 r = perp(x);
    return Vec3(w0 * std::exp(-r.squaredNorm() / (2.0 * sigma * sigma)) * up);
  };
  f.jac_u = [=](const Vec3& x) {
    const Vec3 r = perp(x);
    const double g = std::exp(-r.squaredNorm() / (2.0 * sigma * sigma));
    // grad g = -g r_perp / sigma^2 (r_perp has no component along up).
    const Vec3 dg = -g / (sigma * sigma) * r;
    return Eigen::Matrix3d(w0 * up * dg.transpose());
  };
  f.p = [=](const Vec3& x) {
    const Vec3 q = (x - center) / L;
    const double zeta = q.dot(up);
    const Vec3 r = q - zeta * up;
    return K * std::exp(-r.squaredNorm() / (2.0 * s * s)) * std::erf(zeta / (std::numbers::sqrt2 * s));
  };
  f.grad_p = [=](const Vec3& x) {
    const Vec3 q = (x - center) / L;
    const double zeta = q.dot(up);
    const Vec3 r = q - zeta * up;
    const double E = std::exp(-r.squaredNorm() / (2.0 * s * s));
    const double F = std::erf(zeta / (std::numbers::sqrt2 * s));
    const double dF = std::sqrt(2.0 / std::numbers::pi) / s * std::exp(-zeta * zeta / (2.0 * s * s));
    const Vec3 g_hat = K * (-E * F / (s * s) * r + E * dF * up);
    return Vec3(g_hat / L);
  };
  return f;
}

double derivative_mismatch(const AnalyticFlow& f, const Box& box, int n, std::uint64_t seed) {
  CounterRng rng(seed, 0x4644);
  const double h = 1e-4 * box.extent().maxCoeff();
  double worst = 0.0;
  auto rel = [](const Vec3& a, const Vec3& b) {
    const double scale = std::max(b.norm(), 1e-3);
    return (a - b).norm() / scale;
  };
  for (int i = 0; i < n; ++i) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = rng.uniform(box.lo[k], box.hi[k]);
    Vec3 gT, gp;
    Eigen::Matrix3d J;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = h;
      // Fourth-order central difference.
      auto d = [&](auto&& fn) { return (-fn(x + 2 * e) + 8.0 * fn(x + e) - 8.0 * fn(x - e) + fn(x - 2 * e)) / (12.0 * h); };
      gT[k] = d(f.T);
      gp[k] = d(f.p);
      J.col(k) = d([&](const Vec3& y) { return f.u(y); });
    }
    worst = std::max(worst, rel(f.grad_T(x), gT));
    worst = std::max(worst, rel(f.grad_p(x), gp));
    const Eigen::Matrix3d Ja = f.jac_u(x);
    const double su = std::max(Ja.norm(), 1e-3);
    worst = std::max(worst, (Ja - J).norm() / su);
  }
  return worst;
}

void verify_derivatives(const AnalyticFlow& f, const Box& box, double tol) {
  const double e = derivative_mismatch(f, box, 100, 7);
  if (!(e <= tol)) {
    std::ostringstream s;
    s << "analytic flow derivative closures disagree with finite differences (max rel. error " << e << ")";
    throw std::runtime_error(s.str());
  }
}

FlowState truth_state(const AnalyticFlow& f, const Vec3& x, const MediumConstants& m, const NondimConstants& c) {
  return FlowState{m.nondim_temperature(f.T(x)), f.p(x), f.u(x) / c.U};
}

ResidualTriple fd_residuals(const AnalyticFlow& f, const Vec3& x, const MediumConstants& m, const NondimConstants& c,
                            double h) {
  auto state = [&](const Vec3& y) {
    const FlowState s = truth_state(f, y, m, c);
    Eigen::Matrix<double, kChannels, 1> v;
    v << s.T_nd, s.p, s.u[0], s.u[1], s.u[2];
    return v;
  };
  const auto v0 = state(x);
  Eigen::Matrix<double, kChannels, 3> d1, d2;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    const auto vp = state(x + e), vm = state(x - e);
    d1.col(k) = (vp - vm) / (2.0 * h);
    d2.col(k) = (vp - 2.0 * v0 + vm) / (h * h);
  }
  ChannelJet<double> j;
  for (int ch = 0; ch < kChannels; ++ch) {
    j.v[ch] = v0[ch];
    for (int k = 0; k < 3; ++k) {
      j.d1[ch][k] = d1(ch, k);
      j.d2[ch][k] = d2(ch, k);
    }
  }
  return residuals_from_jet(j, c);
}

Measurement synthesize_measurement(const Scene& scene, const AnalyticFlow& f, int spp, std::uint64_t seed,
                                   double step) {
  Scene s = scene;
  s.trace.step = step;
  Measurement out;
  const ConstantField ambient(scene.ambient_eta());
  out.ref = render_image(s, ambient, spp, seed);
  auto T = std::make_shared<AnalyticField>(f.T, f.grad_T);
  const EtaFromTemperature eta(T, scene.medium);
  out.flow = render_image(s, eta, spp, seed);
  return out;
}

namespace {

void fill_channels(VoxelGrid& g, int i, int j, int k, const FlowState& s, const MediumConstants& m,
                   const NondimConstants& c) {
  g.at(i, j, k, 0) = m.temperature(s.T_nd);
  g.at(i, j, k, 1) = s.p;
  for (int a = 0; a < 3; ++a) g.at(i, j, k, 2 + a) = s.u[a] * c.U;
}

}  // namespace

VoxelGrid boundary_grid(const Scene& scene, const AnalyticFlow& f, int res) {
  if (res < 2) throw std::invalid_argument("boundary grid resolution must be >= 2");
  const PlaneRect rect = boundary_rect(scene);
  const int ax = rect.axis;
  const double h = scene.room.extent()[ax] / 63.0;
  Box bbox{rect.lo, rect.hi};
  if (rect.offset + h <= scene.room.hi[ax]) bbox.hi[ax] = rect.offset + h;
  else bbox.lo[ax] = rect.offset - h;
  std::array<int, 3> dims{res, res, res};
  dims[ax] = 2;
  VoxelGrid g(dims, bbox, kChannels);
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        fill_channels(g, i, j, k, truth_state(f, g.node(i, j, k), scene.medium, scene.nondim), scene.medium,
                      scene.nondim);
  return g;
}

Eigen::Matrix3Xd eval_grid_points(const Box& room, int n) {
  if (n < 2) throw std::invalid_argument("evaluation grid must have >= 2 nodes per axis");
  VoxelGrid g({n, n, n}, room, 1);
  Eigen::Matrix3Xd x(3, static_cast<Eigen::Index>(n) * n * n);
  Eigen::Index c = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) x.col(c++) = g.node(i, j, k);
  return x;
}

namespace {

std::vector<FlowState> network_states(const NeuralField& nf, const Eigen::Matrix3Xd& x) {
  const JetBatch j = nf.evaluate(x, 0);
  std::vector<FlowState> out(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    out[i] = FlowState{j.value(kT, i), j.value(kP, i), Vec3(j.value(kUx, i), j.value(kUy, i), j.value(kUz, i))};
  return out;
}

std::vector<FlowState> truth_states(const AnalyticFlow& f, const Eigen::Matrix3Xd& x, const Scene& scene) {
  std::vector<FlowState> out(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) out[i] = truth_state(f, x.col(i), scene.medium, scene.nondim);
  return out;
}

VoxelGrid grid_from_states(const Scene& scene, const std::vector<FlowState>& states, int n) {
  VoxelGrid g({n, n, n}, scene.room, kChannels);
  std::size_t c = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) fill_channels(g, i, j, k, states[c++], scene.medium, scene.nondim);
  return g;
}

}  // namespace

VoxelGrid flow_grid(const Scene& scene, const std::function<FlowState(const Vec3&)>& sample, int n) {
  const Eigen::Matrix3Xd x = eval_grid_points(scene.room, n);
  std::vector<FlowState> s(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) s[i] = sample(x.col(i));
  return grid_from_states(scene, s, n);
}

VoxelGrid flow_grid(const Scene& scene, const NeuralField& nf, int n) {
  return grid_from_states(scene, network_states(nf, eval_grid_points(scene.room, n)), n);
}

Metrics evaluate(const std::vector<FlowState>& pred, const std::vector<FlowState>& truth, const MediumConstants& m) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("metric inputs differ in size");
  double sT = 0, sp = 0, su = 0, mT = 0, mp = 0, mu = 0, aT = 0, ap = 0, au = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double eT = m.delta_T() * (pred[i].T_nd - truth[i].T_nd);
    const double ep = pred[i].p - truth[i].p;
    const double eu = (pred[i].u - truth[i].u).norm();
    sT += eT * eT;
    sp += ep * ep;
    su += eu * eu;
    mT = std::max(mT, std::abs(eT));
    mp = std::max(mp, std::abs(ep));
    mu = std::max(mu, eu);
    aT = std::max(aT, std::abs(m.delta_T() * truth[i].T_nd));
    ap = std::max(ap, std::abs(truth[i].p));
    au = std::max(au, truth[i].u.norm());
  }
  const double n = static_cast<double>(pred.size());
  auto fm = [&](double s, double mx, double amp) {
    const double rmse = std::sqrt(s / n);
    return FieldMetrics{rmse, amp > 0.0 ? rmse / amp : 0.0, mx};
  };
  return Metrics{fm(sT, mT, aT), fm(sp, mp, ap), fm(su, mu, au)};
}

Metrics evaluate(const FlowSampler& pred, const AnalyticFlow& truth, const Scene& scene, int n) {
  const Eigen::Matrix3Xd x = eval_grid_points(scene.room, n);
  std::vector<FlowState> p(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) p[i] = pred(x.col(i));
  return evaluate(p, truth_states(truth, x, scene), scene.medium);
}

Metrics evaluate(const NeuralField& nf, const AnalyticFlow& truth, const Scene& scene, int n) {
  const Eigen::Matrix3Xd x = eval_grid_points(scene.room, n);
  return evaluate(network_states(nf, x), truth_states(truth, x, scene), scene.medium);
}

VoxelGrid error_volume(const NeuralField& nf, const AnalyticFlow& truth, const Scene& scene, int n) {
  const Eigen::Matrix3Xd x = eval_grid_points(scene.room, n);
  const auto p = network_states(nf, x);
  const auto t = truth_states(truth, x, scene);
  VoxelGrid g({n, n, n}, scene.room, 3);
  std::size_t c = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++c) {
        g.at(i, j, k, 0) = std::abs(scene.medium.delta_T() * (p[c].T_nd - t[c].T_nd));
        g.at(i, j, k, 1) = std::abs(p[c].p - t[c].p);
        g.at(i, j, k, 2) = (p[c].u - t[c].u).norm();
      }
  return g;
}

namespace {

ResidualStats stats_of(const std::vector<ResidualTriple>& r) {
  ResidualStats s;
  for (const auto& t : r) {
    s.mass_rms += t.mass * t.mass;
    s.mom_rms += t.mom[0] * t.mom[0] + t.mom[1] * t.mom[1] + t.mom[2] * t.mom[2];
    s.heat_rms += t.heat * t.heat;
  }
  const double n = static_cast<double>(r.size());
  s.mass_rms = std::sqrt(s.mass_rms / n);
  s.mom_rms = std::sqrt(s.mom_rms / n);
  s.heat_rms = std::sqrt(s.heat_rms / n);
  return s;
}

/// Interior nodes only, so central differences stay inside the room.
Eigen::Matrix3Xd interior_points(const Box& room, int n) {
  Box inner = room;
  const Vec3 pad = room.extent() / (2.0 * n);
  inner.lo += pad;
  inner.hi -= pad;
  return eval_grid_points(inner, n);
}

}  // namespace

ResidualStats truth_residual_stats(const AnalyticFlow& f, const Scene& scene, int n) {
  const Eigen::Matrix3Xd x = interior_points(scene.room, n);
  std::vector<ResidualTriple> r(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) r[i] = fd_residuals(f, x.col(i), scene.medium, scene.nondim);
  return stats_of(r);
}

ResidualStats network_residual_stats(const NeuralField& nf, const Scene& scene, int n) {
  return stats_of(residuals(nf, interior_points(scene.room, n), scene.nondim));
}

std::vector<std::pair<std::string, LossWeights>> regime_profiles(const LossWeights& w) {
  LossWeights a = w, b = w, c = w;
  a.lambda_pde = 0.0;
  b.lambda_bos = 0.0;
  return {{"bos_boundary", a}, {"pde_boundary", b}, {"combined", c}};
}

nlohmann::json metrics_json(const Metrics& m) {
  auto f = [](const FieldMetrics& x) { return nlohmann::json{{"rmse", x.rmse}, {"nrmse", x.nrmse}, {"max_abs", x.max_abs}}; };
  return {{"T_K", f(m.T)}, {"p", f(m.p)}, {"u", f(m.u)}};
}

StudyReport regime_study(const Scene& scene, const AnalyticFlow& truth, const Image& measurement,
                         const BoundaryReference& boundary, const TrainConfig& base, const StudyOptions& opts) {
  verify_derivatives(truth, scene.room);
  StudyReport rep;
  rep.truth_residuals = truth_residual_stats(truth, scene, 16);
  for (const auto& [name, w] : regime_profiles(base.weights)) {
    TrainConfig cfg = base;
    cfg.weights = w;
    TrainOptions to;
    const fs::path dir = opts.out_dir / name;
    to.out_dir = dir;
    if (opts.on_iteration) {
      const std::string n = name;
      to.on_iteration = [&, n](const HistoryRow& r) { opts.on_iteration(n, r); };
    }
    TrainResult tr = train(scene, measurement, &boundary, cfg, to);
    RegimeResult rr;
    rr.name = name;
    rr.weights = w;
    rr.metrics = evaluate(tr.field, truth, scene, opts.eval_grid);
    rr.residuals = network_residual_stats(tr.field, scene, 16);
    if (!tr.history.empty()) rr.final_terms = tr.history.back().terms;
    write_voxgrid(dir / "error.vox", error_volume(tr.field, truth, scene, opts.eval_grid));
    std::ofstream(dir / "metrics.json") << metrics_json(rr.metrics).dump(2) << '\n';
    rep.regimes.push_back(rr);
  }
  const Metrics& bb = rep.regimes[0].metrics;
  const Metrics& comb = rep.regimes[2].metrics;
  rep.p_ratio = comb.p.rmse > 0.0 ? bb.p.rmse / comb.p.rmse : std::numeric_limits<double>::infinity();
  rep.u_ratio = comb.u.rmse > 0.0 ? bb.u.rmse / comb.u.rmse : std::numeric_limits<double>::infinity();
  write_report(opts.out_dir, rep);
  return rep;
}

void write_report(const fs::path& dir, const StudyReport& r) {
  fs::create_directories(dir);
  std::ofstream csv(dir / "report.csv");
  csv << "regime,lambda_bos,lambda_boundary,lambda_pde,T_rmse_K,T_nrmse,T_max_abs_K,p_rmse,p_nrmse,p_max_abs,"
         "u_rmse,u_nrmse,u_max_abs,r_mass_rms,r_mom_rms,r_heat_rms,final_total_loss\n";
  for (const auto& g : r.regimes) {
    const auto& m = g.metrics;
    csv << g.name << ',' << format_double(g.weights.lambda_bos) << ',' << format_double(g.weights.lambda_boundary) << ','
        << format_double(g.weights.lambda_pde);
    for (const FieldMetrics* f : {&m.T, &m.p, &m.u})
      csv << ',' << format_double(f->rmse) << ',' << format_double(f->nrmse) << ',' << format_double(f->max_abs);
    csv << ',' << format_double(g.residuals.mass_rms) << ',' << format_double(g.residuals.mom_rms) << ','
        << format_double(g.residuals.heat_rms) << ',' << format_double(g.final_terms.total) << '\n';
  }
  std::ofstream txt(dir / "summary.txt");
  txt.setf(std::ios::scientific);
  txt.precision(4);
  txt << "regime          T rmse [K]   p rmse       u rmse\n";
  for (const auto& g : r.regimes) {
    txt << g.name << std::string(16 - std::min<std::size_t>(15, g.name.size()), ' ') << g.metrics.T.rmse << "   "
        << g.metrics.p.rmse << "   " << g.metrics.u.rmse << '\n';
  }
  txt << "\np rmse ratio (bos_boundary / combined): " << r.p_ratio << "\nu rmse ratio (bos_boundary / combined): "
      << r.u_ratio << "\n\nground-truth residual rms (finite differences): mass " << r.truth_residuals.mass_rms
      << ", momentum " << r.truth_residuals.mom_rms << ", heat " << r.truth_residuals.heat_rms << '\n';
}

}  // namespace bos
