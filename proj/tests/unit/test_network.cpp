#include "support.hpp"

#include "bostomo/network.hpp"
#include "bostomo/parallel.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace bos;

namespace {

const Box kRoom{Vec3(-1.2, -2, 0), Vec3(2.9, 2, 3)};

NetworkConfig cfg_of(std::vector<int> hidden, int fourier = 0) {
  NetworkConfig c;
  c.hidden = std::move(hidden);
  c.fourier_features = fourier;
  return c;
}

// Plain loops over the documented parameter layout.
std::array<double, 5> loop_forward(const NeuralField& nf, const Vec3& x) {
  std::vector<double> a(3);
  for (int k = 0; k < 3; ++k) a[k] = 2.0 * (x[k] - kRoom.lo[k]) / (kRoom.hi[k] - kRoom.lo[k]) - 1.0;
  const auto sizes = nf.layer_sizes();
  const auto p = nf.params();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> z(out);
    for (int o = 0; o < out; ++o) {
      double s = p[off + static_cast<std::size_t>(in) * out + o];
      for (int i = 0; i < in; ++i) s += p[off + static_cast<std::size_t>(i) * out + o] * a[i];
      z[o] = (l + 2 < sizes.size()) ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(in) * out + out;
    a = z;
  }
  return {a[0], a[1], a[2], a[3], a[4]};
}

}  // namespace

TEST_CASE("layer layout and parameter count") {
  const NeuralField nf(cfg_of({16, 8}), kRoom, 1);
  CHECK(nf.layer_sizes() == std::vector<int>{3, 16, 8, 5});
  CHECK(nf.param_count() == (3 * 16 + 16) + (16 * 8 + 8) + (8 * 5 + 5));
  const NeuralField ff(cfg_of({16}, 6), kRoom, 1);
  CHECK(ff.input_width() == 15);
}

TEST_CASE("zero weights return the output bias") {
  NeuralField nf(cfg_of({4, 4}), kRoom, 2);
  std::fill(nf.params().begin(), nf.params().end(), 0.0);
  const std::size_t last = nf.param_count() - 5;
  for (int ch = 0; ch < 5; ++ch) nf.params()[last + ch] = 0.5 * ch - 1.0;
  const auto y = nf.forward(Vec3(0.3, 0.1, 1.0));
  for (int ch = 0; ch < 5; ++ch) CHECK(y[ch] == 0.5 * ch - 1.0);
}

TEST_CASE("initialisation is deterministic, float32-exact and seed dependent") {
  const NeuralField a(cfg_of({8, 8}), kRoom, 4);
  const NeuralField b(cfg_of({8, 8}), kRoom, 4);
  const NeuralField c(cfg_of({8, 8}), kRoom, 5);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (double p : a.params()) CHECK(static_cast<double>(static_cast<float>(p)) == p);
}

TEST_CASE("forward matches a loop implementation") {
  NeuralField nf(cfg_of({7, 6, 5}), kRoom, 3);
  CounterRng rng(12, 0);
  for (double& p : nf.params()) p += rng.uniform(-0.1, 0.1);  // non-zero biases
  for (int n = 0; n < 50; ++n) {
    const Vec3 x(rng.uniform(-1.2, 2.9), rng.uniform(-2, 2), rng.uniform(0, 3));
    const auto y = nf.forward(x);
    const auto ref = loop_forward(nf, x);
    for (int ch = 0; ch < 5; ++ch) CHECK(std::abs(y[ch] - ref[ch]) < 1e-12);
  }
}

TEST_CASE("queries outside the room are rejected") {
  const NeuralField nf(cfg_of({4}), kRoom, 1);
  CHECK_THROWS_AS(nf.forward(Vec3(3.5, 0, 1)), std::out_of_range);
  Eigen::Matrix3Xd x(3, 1);
  x.col(0) = Vec3(0, 0, -0.5);
  CHECK_THROWS_AS(nf.evaluate(x, 0), std::out_of_range);
}

TEST_CASE("batched values equal the scalar path and ignore the worker count") {
  const NeuralField nf(cfg_of({12, 12}, 3), kRoom, 6);
  Eigen::Matrix3Xd x(3, 700);
  CounterRng rng(13, 0);
  for (int j = 0; j < x.cols(); ++j) x.col(j) = Vec3(rng.uniform(-1.2, 2.9), rng.uniform(-2, 2), rng.uniform(0, 3));
  set_threads(1);
  const JetBatch a = nf.evaluate(x, 2);
  set_threads(3);
  const JetBatch b = nf.evaluate(x, 2);
  set_threads(1);
  CHECK(a.value == b.value);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.d1[k] == b.d1[k]);
    CHECK(a.d2[k] == b.d2[k]);
  }
  for (int j = 0; j < x.cols(); j += 37) CHECK((a.value.col(j) - nf.forward(x.col(j))).norm() < 1e-13);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::scratch("ckpt");
  NetworkConfig cfg = cfg_of({9, 5}, 2);
  cfg.activation = Activation::Sine;
  cfg.fourier_scale = 2.5;
  const NeuralField nf(cfg, kRoom, 8);
  nf.save(dir / "a.bin");
  const NeuralField back = NeuralField::load(dir / "a.bin");
  CHECK(back == nf);
  const Vec3 x(0.5, 0.5, 0.5);
  CHECK(back.forward(x) == nf.forward(x));

  std::ofstream(dir / "bad.bin") << "NOTACHECKPOINT\n";
  CHECK_THROWS_AS(NeuralField::load(dir / "bad.bin"), ParseError);
  std::ifstream in(dir / "a.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(dir / "cut.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  CHECK_THROWS_AS(NeuralField::load(dir / "cut.bin"), ParseError);
}
