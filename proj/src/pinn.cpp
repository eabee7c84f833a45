#include "bostomo/pinn.hpp"

#include "bostomo/parallel.hpp"
#include "bostomo/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace bos {

namespace {

using Eigen::Index;

/// eta and eta * grad eta from the nondimensional temperature and its gradient.
template <class S>
void eta_force(const S& T_nd, const std::array<S, 3>& dT_nd, const MediumConstants& m, S& eta,
               vops::V3<S>& force) {
  const S T = m.T0 + m.delta_T() * T_nd;
  if (!(value_of(T) > 0.0)) throw std::domain_error("network temperature is not positive");
  const S a = m.rho0_G * m.T0 / T;
  eta = 1.0 + a;
  const S dn = -(a / T) * m.delta_T();
  for (int k = 0; k < 3; ++k) force[k] = eta * (dn * dT_nd[k]);
}

template <class S>
S traced_radiance(const Scene& scene, const CameraRay& ray, std::span<const S> eta,
                  std::span<const vops::V3<S>> force) {
  std::vector<ql::Node<S>> nodes = ql::integrate<S>(ray.line, eta, force);
  if (!ray.line.truncated) ql::close_at_box(nodes, scene.room);
  const auto hit = intersect_wall_nodes<S>(std::span<const ql::Node<S>>(nodes), scene.wall, true);
  if (!hit) return S(0.0);
  return hit_contribution<S>(scene, *hit, ray.outside_length);
}

double straight_radiance(const Scene& scene, const CameraRay& ray) {
  const std::vector<ql::Node<double>> nodes{
      {0.0, vops::from<double>(ray.sample.x_s), vops::from<double>(Vec3(scene.ambient_eta() * ray.sample.v_s))}};
  const auto hit = intersect_wall_nodes<double>(nodes, scene.wall, true);
  if (!hit) return 0.0;
  return hit_contribution<double>(scene, *hit, 0.0);
}

struct RayJob {
  CameraRay ray;
  Index q_begin = 0;
};

struct PixelJobs {
  std::vector<RayJob> rays;
};

/// Camera rays of every pixel in the batch and the query points they need, in batch order.
std::vector<PixelJobs> plan_rays(const BosProblem& prob, std::span<const PixelIndex> pixels, Eigen::Matrix3Xd& points) {
  const Scene& scene = *prob.scene;
  if (scene.projector && scene.render.trace_projector_leg)
    throw ValidationError("the training loss does not support projector-leg tracing");
  std::vector<PixelJobs> jobs(pixels.size());
  Index total = 0;
  for (std::size_t b = 0; b < pixels.size(); ++b) {
    for (const PixelSample& s : pixel_samples(scene.camera, pixels[b], prob.spp, prob.seed)) {
      RayJob job;
      job.ray = prepare_camera_ray(scene, s, prob.step, scene.trace.max_steps);
      if (job.ray.enters_room) {
        job.q_begin = total;
        total += job.ray.line.query_count();
      }
      jobs[b].rays.push_back(std::move(job));
    }
  }
  points.resize(3, total);
  for (const auto& pj : jobs)
    for (const auto& job : pj.rays) {
      if (!job.ray.enters_room) continue;
      const int nq = job.ray.line.query_count();
      for (int k = 0; k < nq; ++k) points.col(job.q_begin + k) = job.ray.line.query_point(k);
    }
  return jobs;
}

double pixel_value(const Scene& scene, const PixelJobs& pj, const JetBatch& jets, const MediumConstants& m) {
  double sum = 0.0;
  for (const auto& job : pj.rays) {
    if (!job.ray.enters_room) {
      sum += straight_radiance(scene, job.ray);
      continue;
    }
    const int nq = job.ray.line.query_count();
    std::vector<double> eta(nq);
    std::vector<vops::V3<double>> force(nq);
    for (int k = 0; k < nq; ++k) {
      const Index q = job.q_begin + k;
      eta_force<double>(jets.value(kT, q), {jets.d1[0](kT, q), jets.d1[1](kT, q), jets.d1[2](kT, q)}, m, eta[k],
                        force[k]);
    }
    sum += traced_radiance<double>(scene, job.ray, eta, force);
  }
  return sum / static_cast<double>(pj.rays.size());
}

/// Taped version of pixel_value; returns (I - measured)^2 and scatters its adjoint into `adj`.
double pixel_loss_taped(const Scene& scene, const PixelJobs& pj, const JetBatch& jets, const MediumConstants& m,
                        double measured, JetBatch& adj, double& rendered) {
  Tape tape;
  Var sum(0.0);
  for (const auto& job : pj.rays) {
    if (!job.ray.enters_room) {
      sum = sum + straight_radiance(scene, job.ray);
      continue;
    }
    const int nq = job.ray.line.query_count();
    std::vector<Var> eta(nq);
    std::vector<vops::V3<Var>> force(nq);
    for (int k = 0; k < nq; ++k) {
      const Index q = job.q_begin + k;
      const Var T = tape.leaf(jets.value(kT, q));
      const std::array<Var, 3> dT{tape.leaf(jets.d1[0](kT, q)), tape.leaf(jets.d1[1](kT, q)),
                                  tape.leaf(jets.d1[2](kT, q))};
      eta_force<Var>(T, dT, m, eta[k], force[k]);
    }
    sum = sum + traced_radiance<Var>(scene, job.ray, eta, force);
  }
  const Var I = sum / static_cast<double>(pj.rays.size());
  const Var r = I - measured;
  const Var loss = r * r;
  rendered = I.v;
  const std::vector<double> g = tape.leaf_gradient(loss);
  std::size_t leaf = 0;
  for (const auto& job : pj.rays) {
    if (!job.ray.enters_room) continue;
    const int nq = job.ray.line.query_count();
    for (int k = 0; k < nq; ++k) {
      const Index q = job.q_begin + k;
      adj.value(kT, q) = g[leaf++];
      for (int a = 0; a < 3; ++a) adj.d1[a](kT, q) = g[leaf++];
    }
  }
  return loss.v;
}

template <class S>
ChannelJet<S> column_jet(const JetBatch& j, Index col, Tape* tape) {
  ChannelJet<S> cj;
  auto make = [&](double v) {
    if constexpr (std::is_same_v<S, Var>) return tape->leaf(v);
    else return v;
  };
  for (int ch = 0; ch < kChannels; ++ch) cj.v[ch] = make(j.value(ch, col));
  for (int ch = 0; ch < kChannels; ++ch)
    for (int k = 0; k < 3; ++k) cj.d1[ch][k] = make(j.d1[k](ch, col));
  for (int ch = 0; ch < kChannels; ++ch)
    for (int k = 0; k < 3; ++k) cj.d2[ch][k] = make(j.d2[k](ch, col));
  return cj;
}

}  // namespace

FlowState field_eval(const NeuralField& nf, const Vec3& x) {
  const auto o = nf.forward(x);
  return FlowState{o[kT], o[kP], Vec3(o[kUx], o[kUy], o[kUz])};
}

std::vector<ResidualTriple> residuals(const NeuralField& nf, const Eigen::Matrix3Xd& x, const NondimConstants& c) {
  const JetBatch j = nf.evaluate(x, 2);
  std::vector<ResidualTriple> out(x.cols());
  for (Index i = 0; i < x.cols(); ++i) out[i] = residuals_from_jet(column_jet<double>(j, i, nullptr), c);
  return out;
}

ResidualTriple residuals(const NeuralField& nf, const Vec3& x, const NondimConstants& c) {
  return residuals(nf, Eigen::Matrix3Xd(x), c)[0];
}

double loss_pde(const NeuralField& nf, const Eigen::Matrix3Xd& points, const LossWeights& w,
                const NondimConstants& c, std::span<double> grad) {
  if (points.cols() == 0) throw std::invalid_argument("collocation batch is empty");
  const Index n = points.cols();
  NeuralField::ForwardCache cache;
  const JetBatch j = nf.evaluate(points, 2, grad.empty() ? nullptr : &cache);
  std::vector<double> per(n);
  if (grad.empty()) {
    for (Index i = 0; i < n; ++i) per[i] = residual_loss(residuals_from_jet(column_jet<double>(j, i, nullptr), c), w);
  } else {
    JetBatch adj = JetBatch::zeros(2, kChannels, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
      const auto i = static_cast<Index>(ii);
      Tape tape;
      const ChannelJet<Var> cj = column_jet<Var>(j, i, &tape);
      const Var l = residual_loss(residuals_from_jet(cj, c), w);
      per[i] = l.v;
      const std::vector<double> g = tape.leaf_gradient(l);
      std::size_t leaf = 0;
      for (int ch = 0; ch < kChannels; ++ch) adj.value(ch, i) = g[leaf++];
      for (int ch = 0; ch < kChannels; ++ch)
        for (int k = 0; k < 3; ++k) adj.d1[k](ch, i) = g[leaf++];
      for (int ch = 0; ch < kChannels; ++ch)
        for (int k = 0; k < 3; ++k) adj.d2[k](ch, i) = g[leaf++];
    });
    nf.backward(cache, adj, grad);
  }
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

Eigen::Matrix<double, kChannels, 1> BoundaryReference::at(const Vec3& x, const MediumConstants& m,
                                                           const NondimConstants& c) const {
  Eigen::Matrix<double, kChannels, 1> r;
  r[kT] = m.nondim_temperature(grid_value(grid, x, 0, OutOfBounds::Clamp));
  r[kP] = grid_value(grid, x, 1, OutOfBounds::Clamp);
  for (int k = 0; k < 3; ++k) r[kUx + k] = grid_value(grid, x, 2 + k, OutOfBounds::Clamp) / c.U;
  return r;
}

BoundarySamples BoundaryReference::sample(const Eigen::Matrix3Xd& x, const MediumConstants& m,
                                          const NondimConstants& c) const {
  BoundarySamples s;
  s.x = x;
  s.ref.resize(kChannels, x.cols());
  for (Index i = 0; i < x.cols(); ++i) s.ref.col(i) = at(x.col(i), m, c);
  return s;
}

PlaneRect boundary_rect(const Scene& scene) {
  PlaneRect r;
  r.axis = scene.boundary.axis;
  r.offset = scene.boundary.offset;
  r.lo = scene.room.lo;
  r.hi = scene.room.hi;
  r.lo[r.axis] = r.hi[r.axis] = r.offset;
  return r;
}

BoundaryScales boundary_scales(const VoxelGrid& grid, const Scene& scene, double min_scale) {
  if (grid.channels != kChannels) throw ValidationError("boundary grid must have 5 channels (T, p, ux, uy, uz)");
  BoundaryReference ref{grid, {}};
  const PlaneRect rect = boundary_rect(scene);
  const int a1 = (rect.axis + 1) % 3, a2 = (rect.axis + 2) % 3;
  constexpr int n = 64;
  double mT = 0.0, mp = 0.0, mu = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec3 x = rect.lo;
      x[a1] = rect.lo[a1] + (rect.hi[a1] - rect.lo[a1]) * i / (n - 1);
      x[a2] = rect.lo[a2] + (rect.hi[a2] - rect.lo[a2]) * j / (n - 1);
      const auto r = ref.at(x, scene.medium, scene.nondim);
      mT = std::max(mT, std::abs(r[kT]));
      mp = std::max(mp, std::abs(r[kP]));
      mu = std::max(mu, Vec3(r[kUx], r[kUy], r[kUz]).norm());
    }
  BoundaryScales s{std::max(mT, min_scale), std::max(mp, min_scale), std::max(mu, min_scale)};
  if (!(s.T > 0.0)) throw ValidationError("boundary reference temperature field is identically ambient; set min_scale");
  if (!(s.p > 0.0)) throw ValidationError("boundary reference pressure field is identically zero; set min_scale");
  if (!(s.u > 0.0)) throw ValidationError("boundary reference velocity field is identically zero; set min_scale");
  return s;
}

BoundaryReference make_boundary_reference(VoxelGrid grid, const Scene& scene, double min_scale) {
  grid.validate();
  const BoundaryScales s = boundary_scales(grid, scene, min_scale);
  return BoundaryReference{std::move(grid), s};
}

template <class S>
S boundary_loss_values(const std::vector<std::array<S, kChannels>>& pred, const Eigen::MatrixXd& ref,
                       const BoundaryScales& scales, BoundaryNormalization mode) {
  using std::sqrt;
  if (static_cast<Index>(pred.size()) != ref.cols()) throw std::invalid_argument("boundary sample count mismatch");
  S nT(scales.T), np(scales.p), nu(scales.u);
  if (mode == BoundaryNormalization::OwnMax) {
    // Each prediction field is divided by its own max-abs over the batch.
    std::size_t iT = 0, ip = 0, iu = 0;
    double bT = -1.0, bp = -1.0, bu = -1.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double t = std::abs(value_of(pred[i][kT])), p = std::abs(value_of(pred[i][kP]));
      const double u = std::sqrt(square(value_of(pred[i][kUx])) + square(value_of(pred[i][kUy])) +
                                 square(value_of(pred[i][kUz])));
      if (t > bT) bT = t, iT = i;
      if (p > bp) bp = p, ip = i;
      if (u > bu) bu = u, iu = i;
    }
    auto abs_s = [](const S& x) { return value_of(x) < 0.0 ? -x : x; };
    nT = bT > 0.0 ? abs_s(pred[iT][kT]) : S(1.0);
    np = bp > 0.0 ? abs_s(pred[ip][kP]) : S(1.0);
    nu = bu > 0.0 ? sqrt(pred[iu][kUx] * pred[iu][kUx] + pred[iu][kUy] * pred[iu][kUy] + pred[iu][kUz] * pred[iu][kUz])
                  : S(1.0);
  }
  S total(0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Index c = static_cast<Index>(i);
    const S eT = pred[i][kT] / nT - ref(kT, c) / scales.T;
    const S ep = pred[i][kP] / np - ref(kP, c) / scales.p;
    total = total + eT * eT + ep * ep;
    for (int k = 0; k < 3; ++k) {
      const S eu = pred[i][kUx + k] / nu - ref(kUx + k, c) / scales.u;
      total = total + eu * eu;
    }
  }
  return total;
}

template double boundary_loss_values<double>(const std::vector<std::array<double, kChannels>>&, const Eigen::MatrixXd&,
                                             const BoundaryScales&, BoundaryNormalization);
template Var boundary_loss_values<Var>(const std::vector<std::array<Var, kChannels>>&, const Eigen::MatrixXd&,
                                       const BoundaryScales&, BoundaryNormalization);

double loss_boundary(const NeuralField& nf, const BoundarySamples& samples, const BoundaryScales& scales,
                     BoundaryNormalization mode, std::span<double> grad) {
  const Index n = samples.x.cols();
  if (n == 0) throw std::invalid_argument("boundary batch is empty");
  NeuralField::ForwardCache cache;
  const JetBatch j = nf.evaluate(samples.x, 0, grad.empty() ? nullptr : &cache);
  if (grad.empty()) {
    std::vector<std::array<double, kChannels>> pred(n);
    for (Index i = 0; i < n; ++i)
      for (int ch = 0; ch < kChannels; ++ch) pred[i][ch] = j.value(ch, i);
    return boundary_loss_values(pred, samples.ref, scales, mode);
  }
  Tape tape;
  tape.reserve(static_cast<std::size_t>(n) * 40);
  std::vector<std::array<Var, kChannels>> pred(n);
  for (Index i = 0; i < n; ++i)
    for (int ch = 0; ch < kChannels; ++ch) pred[i][ch] = tape.leaf(j.value(ch, i));
  const Var l = boundary_loss_values(pred, samples.ref, scales, mode);
  const std::vector<double> g = tape.leaf_gradient(l);
  JetBatch adj = JetBatch::zeros(0, kChannels, n);
  std::size_t leaf = 0;
  for (Index i = 0; i < n; ++i)
    for (int ch = 0; ch < kChannels; ++ch) adj.value(ch, i) = g[leaf++];
  nf.backward(cache, adj, grad);
  return l.v;
}

double loss_bos(const NeuralField& nf, const BosProblem& prob, std::span<const PixelIndex> pixels,
                std::span<double> grad, std::vector<double>* rendered) {
  if (!prob.scene || !prob.measured) throw std::invalid_argument("BOS problem is incomplete");
  const Scene& scene = *prob.scene;
  const Image& meas = *prob.measured;
  if (meas.rows != scene.camera.rows || meas.cols != scene.camera.cols)
    throw ValidationError("measurement resolution does not match the camera");
  Eigen::Matrix3Xd points;
  const std::vector<PixelJobs> jobs = plan_rays(prob, pixels, points);
  NeuralField::ForwardCache cache;
  const JetBatch jets = nf.evaluate(points, 1, grad.empty() ? nullptr : &cache);
  std::vector<double> per(pixels.size()), values(pixels.size());
  if (grad.empty()) {
    parallel_for(pixels.size(), [&](std::size_t b) {
      values[b] = pixel_value(scene, jobs[b], jets, scene.medium);
      const double r = values[b] - meas.at(pixels[b]);
      per[b] = r * r;
    });
  } else {
    JetBatch adj = JetBatch::zeros(1, kChannels, points.cols());
    parallel_for(pixels.size(), [&](std::size_t b) {
      per[b] = pixel_loss_taped(scene, jobs[b], jets, scene.medium, meas.at(pixels[b]), adj, values[b]);
    });
    nf.backward(cache, adj, grad);
  }
  if (rendered) *rendered = values;
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

Image render_image_neural(const NeuralField& nf, const Scene& scene, int spp, std::uint64_t seed, double step) {
  Image img;
  img.rows = scene.camera.rows;
  img.cols = scene.camera.cols;
  img.spp = spp;
  img.seed = seed;
  img.data.assign(static_cast<std::size_t>(img.rows) * img.cols, 0.0);
  std::vector<PixelIndex> pixels;
  pixels.reserve(img.data.size());
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) pixels.push_back({r, c});
  BosProblem prob{&scene, &img, spp, seed, step};
  // Row blocks bound the memory of the query-point batch.
  const std::size_t block = 1024;
  for (std::size_t begin = 0; begin < pixels.size(); begin += block) {
    const std::size_t count = std::min(block, pixels.size() - begin);
    const std::span<const PixelIndex> sub(pixels.data() + begin, count);
    Eigen::Matrix3Xd points;
    const std::vector<PixelJobs> jobs = plan_rays(prob, sub, points);
    const JetBatch jets = nf.evaluate(points, 1);
    parallel_for(count, [&](std::size_t b) { img.data[begin + b] = pixel_value(scene, jobs[b], jets, scene.medium); });
  }
  return img;
}

std::pair<double, Vec3> NeuralEtaField::value_and_gradient(const Vec3& x) const {
  const JetBatch j = nf_.evaluate(Eigen::Matrix3Xd(nf_.room().clamp(x)), 1);
  double eta = 0.0;
  vops::V3<double> force;
  eta_force<double>(j.value(kT, 0), {j.d1[0](kT, 0), j.d1[1](kT, 0), j.d1[2](kT, 0)}, m_, eta, force);
  return {eta, Vec3(force[0], force[1], force[2]) / eta};
}

double NeuralEtaField::value(const Vec3& x) const { return value_and_gradient(x).first; }
Vec3 NeuralEtaField::gradient(const Vec3& x) const { return value_and_gradient(x).second; }

LossTerms total_loss(const NeuralField& nf, const BosProblem& bos, const Batches& batches, const LossWeights& w,
                     const NondimConstants& c, BoundaryNormalization mode, const BoundaryScales& scales,
                     std::span<double> grad) {
  if (!(w.lambda_bos > 0.0) && !(w.lambda_boundary > 0.0) && !(w.lambda_pde > 0.0))
    throw std::invalid_argument("all loss weights are zero");
  const bool with_grad = !grad.empty();
  const std::size_t np = nf.param_count();
  LossTerms t;
  std::vector<double> g;
  auto accumulate = [&](double lambda) {
    for (std::size_t i = 0; i < np; ++i) grad[i] += lambda * g[i];
  };
  if (w.lambda_pde > 0.0) {
    if (with_grad) g.assign(np, 0.0);
    t.pde = loss_pde(nf, batches.collocation, w, c, with_grad ? std::span<double>(g) : std::span<double>{});
    if (with_grad) accumulate(w.lambda_pde);
  }
  if (w.lambda_boundary > 0.0) {
    if (with_grad) g.assign(np, 0.0);
    t.boundary = loss_boundary(nf, batches.boundary, scales, mode, with_grad ? std::span<double>(g) : std::span<double>{});
    if (with_grad) accumulate(w.lambda_boundary);
  }
  if (w.lambda_bos > 0.0) {
    if (with_grad) g.assign(np, 0.0);
    t.bos = loss_bos(nf, bos, batches.pixels, with_grad ? std::span<double>(g) : std::span<double>{});
    if (with_grad) accumulate(w.lambda_bos);
  }
  t.total = w.lambda_bos * t.bos + w.lambda_boundary * t.boundary + w.lambda_pde * t.pde;
  return t;
}

}  // namespace bos
