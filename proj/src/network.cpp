#include "bostomo/network.hpp"

#include "bostomo/parallel.hpp"

#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace bos {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

/// sigma and its first three derivatives, elementwise.
struct ActDerivs {
  MatrixXd s0, s1, s2, s3;
};

ActDerivs activate(Activation act, const MatrixXd& z, int order) {
  ActDerivs r;
  switch (act) {
    case Activation::Tanh: {
      r.s0 = z.array().tanh().matrix();
      r.s1 = (1.0 - r.s0.array().square()).matrix();
      if (order >= 1) r.s2 = (-2.0 * r.s0.array() * r.s1.array()).matrix();
      if (order >= 2)
        r.s3 = (-2.0 * r.s1.array().square() + 4.0 * r.s0.array().square() * r.s1.array()).matrix();
      break;
    }
    case Activation::Sine: {
      r.s0 = z.array().sin().matrix();
      r.s1 = z.array().cos().matrix();
      if (order >= 1) r.s2 = -r.s0;
      if (order >= 2) r.s3 = -r.s1;
      break;
    }
    case Activation::Identity: {
      r.s0 = z;
      r.s1 = MatrixXd::Ones(z.rows(), z.cols());
      if (order >= 1) r.s2 = MatrixXd::Zero(z.rows(), z.cols());
      if (order >= 2) r.s3 = MatrixXd::Zero(z.rows(), z.cols());
      break;
    }
  }
  return r;
}

double act_scalar(Activation act, double z) {
  switch (act) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sine: return std::sin(z);
    case Activation::Identity: return z;
  }
  return z;
}

}  // namespace

JetBatch JetBatch::zeros(int order, Index rows, Index cols) {
  JetBatch j;
  j.order = order;
  j.value = MatrixXd::Zero(rows, cols);
  if (order >= 1)
    for (auto& m : j.d1) m = MatrixXd::Zero(rows, cols);
  if (order >= 2)
    for (auto& m : j.d2) m = MatrixXd::Zero(rows, cols);
  return j;
}

NeuralField::NeuralField(const NetworkConfig& cfg, const Box& room, std::uint64_t init_seed)
    : cfg_(cfg), room_(room), seed_(init_seed) {
  if (room.degenerate()) throw std::invalid_argument("network room box is degenerate");
  for (int h : cfg.hidden)
    if (h < 1) throw std::invalid_argument("hidden layer widths must be >= 1");
  if (cfg.fourier_features < 0) throw std::invalid_argument("fourier_features must be >= 0");
  build_layout();
  init_fourier();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    CounterRng rng(init_seed, 0x4c41594552ULL, l);
    const double limit = std::sqrt(6.0 / (L.in + L.out));
    for (int k = 0; k < L.in * L.out; ++k) params_[L.offset + k] = rng.uniform(-limit, limit);
  }
  round_to_float();
}

int NeuralField::input_width() const { return 3 + 2 * cfg_.fourier_features; }

std::vector<int> NeuralField::layer_sizes() const {
  std::vector<int> s{input_width()};
  s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  s.push_back(kChannels);
  return s;
}

void NeuralField::build_layout() {
  const std::vector<int> sizes = layer_sizes();
  layers_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    layers_.push_back({sizes[l], sizes[l + 1], offset});
    offset += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  }
  params_.assign(offset, 0.0);
}

void NeuralField::init_fourier() {
  const int m = cfg_.fourier_features;
  fourier_B_.resize(m, 3);
  CounterRng rng(seed_, 0x464f5552ULL);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < 3; ++k) fourier_B_(i, k) = cfg_.fourier_scale * rng.normal();
}

void NeuralField::set_params(std::span<const double> p) {
  if (p.size() != params_.size()) throw std::invalid_argument("parameter count mismatch");
  std::copy(p.begin(), p.end(), params_.begin());
}

void NeuralField::round_to_float() {
  for (double& p : params_) p = static_cast<double>(static_cast<float>(p));
}

Eigen::Map<const Eigen::MatrixXd> NeuralField::W(std::size_t l) const {
  const Layer& L = layers_[l];
  return Eigen::Map<const MatrixXd>(params_.data() + L.offset, L.out, L.in);
}

Eigen::Map<const Eigen::VectorXd> NeuralField::b(std::size_t l) const {
  const Layer& L = layers_[l];
  return Eigen::Map<const Eigen::VectorXd>(params_.data() + L.offset + static_cast<std::size_t>(L.in) * L.out, L.out);
}

Vec3 NeuralField::normalize(const Vec3& x) const {
  return (2.0 * (x - room_.lo).array() / room_.extent().array() - 1.0).matrix();
}

void NeuralField::check_inside(const Vec3& x) const {
  if (!room_.contains(x, 1e-9 * room_.extent().maxCoeff())) throw std::out_of_range("field query outside the room");
}

Eigen::Matrix<double, kChannels, 1> NeuralField::forward(const Vec3& x) const {
  check_inside(x);
  const Vec3 s = normalize(x);
  Eigen::VectorXd a(input_width());
  a.head<3>() = s;
  const int m = cfg_.fourier_features;
  if (m > 0) {
    const Eigen::VectorXd phi = 2.0 * std::numbers::pi * (fourier_B_ * s);
    a.segment(3, m) = phi.array().sin().matrix();
    a.segment(3 + m, m) = phi.array().cos().matrix();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = W(l) * a + b(l);
    if (l + 1 < layers_.size())
      for (Index i = 0; i < z.size(); ++i) z[i] = act_scalar(cfg_.activation, z[i]);
    a = std::move(z);
  }
  return a;
}

JetBatch NeuralField::encode(const Eigen::Matrix3Xd& x, Index begin, Index count, int order) const {
  const int m = cfg_.fourier_features;
  JetBatch e = JetBatch::zeros(order, input_width(), count);
  const Vec3 c = (2.0 / room_.extent().array()).matrix();
  for (Index j = 0; j < count; ++j) {
    const Vec3 xj = x.col(begin + j);
    check_inside(xj);
    e.value.col(j).head<3>() = normalize(xj);
  }
  if (order >= 1)
    for (int k = 0; k < 3; ++k) e.d1[k].row(k).setConstant(c[k]);
  if (m == 0) return e;
  const MatrixXd phi = 2.0 * std::numbers::pi * (fourier_B_ * e.value.topRows(3));
  const MatrixXd sn = phi.array().sin().matrix();
  const MatrixXd cs = phi.array().cos().matrix();
  e.value.middleRows(3, m) = sn;
  e.value.middleRows(3 + m, m) = cs;
  if (order >= 1) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd dphi = 2.0 * std::numbers::pi * c[k] * fourier_B_.col(k);
      e.d1[k].middleRows(3, m) = (cs.array().colwise() * dphi.array()).matrix();
      e.d1[k].middleRows(3 + m, m) = -(sn.array().colwise() * dphi.array()).matrix();
      if (order >= 2) {
        const Eigen::ArrayXd dphi2 = dphi.array().square();
        e.d2[k].middleRows(3, m) = -(sn.array().colwise() * dphi2).matrix();
        e.d2[k].middleRows(3 + m, m) = -(cs.array().colwise() * dphi2).matrix();
      }
    }
  }
  return e;
}

JetBatch NeuralField::evaluate_chunk(const Eigen::Matrix3Xd& x, Index begin, Index count, int order,
                                     Cache* cache) const {
  JetBatch a = encode(x, begin, count, order);
  if (cache) {
    cache->begin = begin;
    cache->count = count;
    cache->order = order;
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto Wl = W(l);
    JetBatch z;
    z.order = order;
    z.value.noalias() = Wl * a.value;
    z.value.colwise() += b(l);
    for (int k = 0; k < 3 && order >= 1; ++k) z.d1[k].noalias() = Wl * a.d1[k];
    for (int k = 0; k < 3 && order >= 2; ++k) z.d2[k].noalias() = Wl * a.d2[k];
    if (cache) cache->inputs.push_back(std::move(a));
    if (l + 1 == layers_.size()) return z;
    const ActDerivs s = activate(cfg_.activation, z.value, order);
    JetBatch next;
    next.order = order;
    next.value = s.s0;
    for (int k = 0; k < 3 && order >= 1; ++k) next.d1[k] = (s.s1.array() * z.d1[k].array()).matrix();
    for (int k = 0; k < 3 && order >= 2; ++k)
      next.d2[k] = (s.s2.array() * z.d1[k].array().square() + s.s1.array() * z.d2[k].array()).matrix();
    if (cache) cache->pre.push_back(std::move(z));
    a = std::move(next);
  }
  throw std::logic_error("network has no layers");
}

JetBatch NeuralField::evaluate(const Eigen::Matrix3Xd& x, int order, ForwardCache* cache) const {
  if (order < 0 || order > 2) throw std::invalid_argument("jet order must be 0, 1 or 2");
  const Index n = x.cols();
  const Index chunks = (n + kChunk - 1) / kChunk;
  JetBatch out = JetBatch::zeros(order, kChannels, n);
  if (cache) cache->chunks.assign(chunks, Cache{});
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
    const Index begin = static_cast<Index>(c) * kChunk;
    const Index count = std::min(kChunk, n - begin);
    const JetBatch r = evaluate_chunk(x, begin, count, order, cache ? &cache->chunks[c] : nullptr);
    out.value.middleCols(begin, count) = r.value;
    for (int k = 0; k < 3 && order >= 1; ++k) out.d1[k].middleCols(begin, count) = r.d1[k];
    for (int k = 0; k < 3 && order >= 2; ++k) out.d2[k].middleCols(begin, count) = r.d2[k];
  });
  return out;
}

void NeuralField::backward_chunk(const Cache& cache, const JetBatch& adjoint, std::span<double> grad) const {
  const int order = std::min(adjoint.order, cache.order);
  const Index begin = cache.begin, count = cache.count;
  MatrixXd abar = adjoint.value.middleCols(begin, count);
  std::array<MatrixXd, 3> gbar, hbar;
  for (int k = 0; k < 3 && order >= 1; ++k) gbar[k] = adjoint.d1[k].middleCols(begin, count);
  for (int k = 0; k < 3 && order >= 2; ++k) hbar[k] = adjoint.d2[k].middleCols(begin, count);

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& L = layers_[li];
    const JetBatch& in = cache.inputs[li];
    Eigen::Map<MatrixXd> gW(grad.data() + L.offset, L.out, L.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + L.offset + static_cast<std::size_t>(L.in) * L.out, L.out);
    gW.noalias() += abar * in.value.transpose();
    for (int k = 0; k < 3 && order >= 1; ++k) gW.noalias() += gbar[k] * in.d1[k].transpose();
    for (int k = 0; k < 3 && order >= 2; ++k) gW.noalias() += hbar[k] * in.d2[k].transpose();
    gb += abar.rowwise().sum();
    if (li == 0) break;

    // Adjoints of the previous activation outputs.
    const auto Wt = W(li).transpose();
    MatrixXd a_out = Wt * abar;
    std::array<MatrixXd, 3> d_out, s_out;
    for (int k = 0; k < 3 && order >= 1; ++k) d_out[k] = Wt * gbar[k];
    for (int k = 0; k < 3 && order >= 2; ++k) s_out[k] = Wt * hbar[k];

    const JetBatch& z = cache.pre[li - 1];
    const ActDerivs s = activate(cfg_.activation, z.value, order);
    Eigen::ArrayXXd zbar = a_out.array() * s.s1.array();
    for (int k = 0; k < 3 && order >= 1; ++k) {
      zbar += d_out[k].array() * s.s2.array() * z.d1[k].array();
      gbar[k] = (d_out[k].array() * s.s1.array()).matrix();
    }
    for (int k = 0; k < 3 && order >= 2; ++k) {
      const auto g = z.d1[k].array();
      zbar += s_out[k].array() * (s.s3.array() * g.square() + s.s2.array() * z.d2[k].array());
      gbar[k] += (2.0 * s_out[k].array() * s.s2.array() * g).matrix();
      hbar[k] = (s_out[k].array() * s.s1.array()).matrix();
    }
    abar = zbar.matrix();
  }
}

void NeuralField::backward(const ForwardCache& cache, const JetBatch& adjoint, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  const std::size_t chunks = cache.chunks.size();
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(params_.size(), 0.0));
  parallel_for(chunks, [&](std::size_t c) { backward_chunk(cache.chunks[c], adjoint, partial[c]); });
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += partial[c][i];
}

void NeuralField::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  std::ostringstream h;
  h.precision(17);
  h << "BOSNF v1\nlayers";
  for (int s : layer_sizes()) h << ' ' << s;
  h << "\nactivation " << to_string(cfg_.activation) << "\nscaling";
  for (int k = 0; k < 3; ++k) h << ' ' << room_.lo[k];
  for (int k = 0; k < 3; ++k) h << ' ' << room_.hi[k];
  h << "\nfourier " << cfg_.fourier_features << ' ' << cfg_.fourier_scale << ' ' << seed_ << "\nparams "
    << params_.size() << '\n';
  f << h.str();
  std::vector<float> buf(params_.begin(), params_.end());
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());
}

NeuralField NeuralField::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  auto line = [&](const char* key) {
    std::string s;
    if (!std::getline(f, s)) throw ParseError("checkpoint truncated before '" + std::string(key) + "'");
    std::istringstream is(s);
    std::string k;
    is >> k;
    if (k != key) throw ParseError("checkpoint: expected '" + std::string(key) + "', got '" + k + "'");
    return is.str().substr(k.size());
  };
  std::string magic;
  std::getline(f, magic);
  if (magic != "BOSNF v1") throw ParseError("not a BOSNF v1 checkpoint");
  std::istringstream layers(line("layers"));
  std::vector<int> sizes;
  for (int s; layers >> s;) sizes.push_back(s);
  std::istringstream act(line("activation"));
  std::string act_name;
  act >> act_name;
  std::istringstream sc(line("scaling"));
  Box room;
  sc >> room.lo[0] >> room.lo[1] >> room.lo[2] >> room.hi[0] >> room.hi[1] >> room.hi[2];
  std::istringstream fo(line("fourier"));
  NetworkConfig cfg;
  std::uint64_t seed = 0;
  fo >> cfg.fourier_features >> cfg.fourier_scale >> seed;
  std::istringstream pc(line("params"));
  std::size_t count = 0;
  pc >> count;
  if (sizes.size() < 2 || !sc || !fo || !pc) throw ParseError("checkpoint header is malformed");
  cfg.activation = activation_from(act_name);
  cfg.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  NeuralField nf;
  nf.cfg_ = cfg;
  nf.room_ = room;
  nf.seed_ = seed;
  nf.build_layout();
  nf.init_fourier();
  if (nf.layer_sizes() != sizes || nf.params_.size() != count) throw ParseError("checkpoint layout mismatch");
  std::vector<float> buf(count);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(count * sizeof(float))) throw ParseError("checkpoint truncated");
  std::copy(buf.begin(), buf.end(), nf.params_.begin());
  return nf;
}

}  // namespace bos
