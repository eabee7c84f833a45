#include "bostomo/optim.hpp"

#include "bostomo/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace bos {

namespace fs = std::filesystem;

OptState make_opt_state(std::size_t n, const TrainConfig& cfg) {
  OptState st;
  st.m.assign(n, 0.0);
  st.s.assign(n, 0.0);
  st.beta1 = cfg.beta1;
  st.beta2 = cfg.beta2;
  st.eps = cfg.eps;
  return st;
}

void optimizer_step(OptState& st, std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != grad.size() || st.m.size() != theta.size() || st.s.size() != theta.size())
    throw std::invalid_argument("optimizer shape mismatch");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    const double e = g - st.m[i];
    st.s[i] = st.beta2 * st.s[i] + (1.0 - st.beta2) * e * e + st.eps;
    const double m_hat = st.m[i] / c1;
    const double s_hat = st.s[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(s_hat) + st.eps);
  }
}

double learning_rate_at(const TrainConfig& cfg, std::int64_t iteration) {
  if (!cfg.cosine_decay) return cfg.learning_rate;
  const double f = static_cast<double>(iteration) / std::max(1, cfg.iterations);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, f)));
}

void save_opt_state(const fs::path& path, const OptState& st) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write optimizer state " + path.string());
  f << "BOSOPT v1\n"
    << "step " << st.step << "\nhyper " << format_double(st.beta1) << ' ' << format_double(st.beta2) << ' '
    << format_double(st.eps) << "\nparams " << st.m.size() << '\n';
  const auto bytes = static_cast<std::streamsize>(st.m.size() * sizeof(double));
  f.write(reinterpret_cast<const char*>(st.m.data()), bytes);
  f.write(reinterpret_cast<const char*>(st.s.data()), bytes);
  if (!f) throw std::runtime_error("failed writing optimizer state " + path.string());
}

OptState load_opt_state(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open optimizer state " + path.string());
  std::string magic, key;
  std::getline(f, magic);
  if (magic != "BOSOPT v1") throw ParseError("not a BOSOPT v1 file: " + path.string());
  OptState st;
  std::size_t n = 0;
  f >> key >> st.step;
  if (key != "step") throw ParseError("optimizer state: expected 'step'");
  f >> key >> st.beta1 >> st.beta2 >> st.eps;
  if (key != "hyper") throw ParseError("optimizer state: expected 'hyper'");
  f >> key >> n;
  if (key != "params" || !f) throw ParseError("optimizer state: expected 'params'");
  f.get();
  st.m.resize(n);
  st.s.resize(n);
  const auto bytes = static_cast<std::streamsize>(n * sizeof(double));
  f.read(reinterpret_cast<char*>(st.m.data()), bytes);
  f.read(reinterpret_cast<char*>(st.s.data()), bytes);
  if (!f) throw ParseError("optimizer state truncated: " + path.string());
  return st;
}

fs::path opt_state_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".opt");
  return p;
}

Eigen::Matrix3Xd sample_collocation(const Box& room, int n, std::uint64_t seed, std::int64_t iteration) {
  if (n < 1) throw std::invalid_argument("collocation batch must be >= 1");
  CounterRng rng(seed, static_cast<std::uint64_t>(iteration), 0);
  Eigen::Matrix3Xd x(3, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) x(k, i) = rng.uniform(room.lo[k], room.hi[k]);
  return x;
}

std::vector<PixelIndex> sample_pixels(const Camera& cam, int n, std::uint64_t seed, std::int64_t iteration) {
  if (n < 1) throw std::invalid_argument("pixel batch must be >= 1");
  CounterRng rng(seed, static_cast<std::uint64_t>(iteration), 1);
  const std::uint64_t total = static_cast<std::uint64_t>(cam.rows) * cam.cols;
  std::vector<PixelIndex> out;
  out.reserve(n);
  auto to_index = [&](std::uint64_t i) {
    return PixelIndex{static_cast<int>(i / cam.cols), static_cast<int>(i % cam.cols)};
  };
  if (static_cast<std::uint64_t>(n) > total) {
    for (int i = 0; i < n; ++i) out.push_back(to_index(rng.below(total)));
    return out;
  }
  std::vector<std::uint32_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0u);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t j = i + rng.below(total - i);
    std::swap(perm[i], perm[j]);
    out.push_back(to_index(perm[i]));
  }
  return out;
}

Eigen::Matrix3Xd sample_boundary_points(const PlaneRect& rect, int n, std::uint64_t seed, std::int64_t iteration) {
  if (n < 1) throw std::invalid_argument("boundary batch must be >= 1");
  CounterRng rng(seed, static_cast<std::uint64_t>(iteration), 2);
  Eigen::Matrix3Xd x(3, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) x(k, i) = k == rect.axis ? rect.offset : rng.uniform(rect.lo[k], rect.hi[k]);
  return x;
}

Batches sample_batches(const Scene& scene, const TrainConfig& cfg, const BoundaryReference* boundary,
                       std::int64_t iteration) {
  Batches b;
  const LossWeights& w = cfg.weights;
  if (w.lambda_pde > 0.0) b.collocation = sample_collocation(scene.room, cfg.batch.collocation, cfg.sampling_seed, iteration);
  if (w.lambda_bos > 0.0) b.pixels = sample_pixels(scene.camera, cfg.batch.pixels, cfg.sampling_seed, iteration);
  if (w.lambda_boundary > 0.0) {
    if (!boundary) throw ValidationError("boundary loss is enabled but no boundary reference was given");
    const Eigen::Matrix3Xd x =
        sample_boundary_points(boundary_rect(scene), cfg.batch.boundary, cfg.sampling_seed, iteration);
    b.boundary = boundary->sample(x, scene.medium, scene.nondim);
  }
  return b;
}

std::uint64_t render_seed_at(const TrainConfig& cfg, std::int64_t iteration) {
  if (!cfg.noisy_render_seeds) return cfg.render_seed;
  return mix64(cfg.render_seed ^ mix64(static_cast<std::uint64_t>(iteration) + 1));
}

namespace {

std::string ckpt_name(std::int64_t it) {
  std::ostringstream s;
  s << "ckpt_" << std::setw(7) << std::setfill('0') << it << ".bin";
  return s.str();
}

void write_snapshot(const fs::path& dir, std::int64_t it, const LossTerms& t, const NeuralField& nf) {
  std::ofstream f(dir / "nonfinite.txt");
  f << "iteration " << it << "\nL_BOS " << format_double(t.bos) << "\nL_boundary " << format_double(t.boundary)
    << "\nL_PDE " << format_double(t.pde) << "\ntotal " << format_double(t.total) << '\n';
  nf.save(dir / "nonfinite_params.bin");
}

}  // namespace

TrainResult train(const Scene& scene, const Image& measurement, const BoundaryReference* boundary,
                  const TrainConfig& cfg, const TrainOptions& opts) {
  if (cfg.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (measurement.rows != scene.camera.rows || measurement.cols != scene.camera.cols)
    throw ValidationError("measurement resolution does not match the camera");
  TrainResult res;
  if (opts.resume) {
    res.field = NeuralField::load(*opts.resume);
    res.state = load_opt_state(opt_state_path(*opts.resume));
    if (res.state.m.size() != res.field.param_count()) throw ValidationError("optimizer state does not match checkpoint");
  } else {
    res.field = NeuralField(cfg.network, scene.room, cfg.init_seed);
    res.state = make_opt_state(res.field.param_count(), cfg);
  }
  NeuralField& nf = res.field;

  std::ofstream csv;
  if (opts.out_dir) {
    fs::create_directories(*opts.out_dir / "checkpoints");
    const fs::path csv_path = *opts.out_dir / "loss.csv";
    const bool append = opts.resume && fs::exists(csv_path);
    csv.open(csv_path, append ? std::ios::app : std::ios::trunc);
    if (!append) csv << "iteration,L_BOS,L_boundary,L_PDE,total\n";
  }

  const BoundaryScales scales = boundary ? boundary->scales : BoundaryScales{};
  std::vector<double> grad(nf.param_count());
  for (std::int64_t it = res.state.step; it < cfg.iterations; ++it) {
    const Batches batches = sample_batches(scene, cfg, boundary, it);
    const BosProblem bos{&scene, &measurement, cfg.spp, render_seed_at(cfg, it), cfg.render_step};
    std::fill(grad.begin(), grad.end(), 0.0);
    LossTerms terms;
    try {
      terms = total_loss(nf, bos, batches, cfg.weights, scene.nondim, cfg.boundary.normalization, scales, grad);
    } catch (const std::domain_error&) {
      terms.total = std::numeric_limits<double>::quiet_NaN();
    }
    bool finite = std::isfinite(terms.total);
    for (double g : grad) finite = finite && std::isfinite(g);
    if (!finite) {
      if (opts.out_dir) write_snapshot(*opts.out_dir, it, terms, nf);
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << " (L_BOS=" << terms.bos << ", L_boundary=" << terms.boundary
          << ", L_PDE=" << terms.pde << ")";
      throw NonFiniteLoss(it, terms, msg.str());
    }
    optimizer_step(res.state, nf.params(), grad, learning_rate_at(cfg, it));
    nf.round_to_float();
    const HistoryRow row{it, terms};
    res.history.push_back(row);
    if (csv.is_open() && (cfg.log_every <= 1 || it % cfg.log_every == 0 || it + 1 == cfg.iterations))
      csv << it << ',' << format_double(terms.bos) << ',' << format_double(terms.boundary) << ','
          << format_double(terms.pde) << ',' << format_double(terms.total) << '\n';
    if (opts.on_iteration) opts.on_iteration(row);
    if (opts.out_dir && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      const fs::path p = *opts.out_dir / "checkpoints" / ckpt_name(it + 1);
      nf.save(p);
      save_opt_state(opt_state_path(p), res.state);
    }
  }
  if (opts.out_dir) {
    nf.save(*opts.out_dir / "final.bin");
    save_opt_state(opt_state_path(*opts.out_dir / "final.bin"), res.state);
  }
  return res;
}

}  // namespace bos
