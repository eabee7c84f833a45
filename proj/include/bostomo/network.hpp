#pragma once

#include "bostomo/common.hpp"
#include "bostomo/config.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

namespace bos {

/// Output channels of the field network.
enum Channel : int { kT = 0, kP = 1, kUx = 2, kUy = 3, kUz = 4, kChannels = 5 };

/// Derivative order carried through a batched evaluation:
/// 0 values, 1 plus gradient, 2 plus Hessian diagonal.
struct JetBatch {
  int order = 0;
  Eigen::MatrixXd value;                ///< channels x N
  std::array<Eigen::MatrixXd, 3> d1;    ///< d/dx_k, physical metres
  std::array<Eigen::MatrixXd, 3> d2;    ///< d2/dx_k2

  static JetBatch zeros(int order, Eigen::Index rows, Eigen::Index cols);
};

/// MLP (T_nd, p, u) = f(x; theta) with inputs mapped from the room box to [-1, 1]^3 and
/// an optional fixed random Fourier encoding. Parameters are a flat vector: for each
/// layer the weight matrix (column-major, out x in) followed by the bias.
class NeuralField {
 public:
  /// Forward-pass intermediates of one column chunk, kept for the backward pass.
  struct Cache {
    Eigen::Index begin = 0;
    Eigen::Index count = 0;
    int order = 0;
    std::vector<JetBatch> inputs;   ///< per layer, the activations entering it
    std::vector<JetBatch> pre;      ///< per hidden layer, the pre-activations
  };
  struct ForwardCache {
    std::vector<Cache> chunks;
  };

  /// Columns per chunk; fixed so results never depend on the worker count.
  static constexpr Eigen::Index kChunk = 256;

  NeuralField() = default;
  NeuralField(const NetworkConfig& cfg, const Box& room, std::uint64_t init_seed);

  const NetworkConfig& config() const { return cfg_; }
  const Box& room() const { return room_; }
  std::uint64_t init_seed() const { return seed_; }
  std::vector<int> layer_sizes() const;
  int input_width() const;

  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  void set_params(std::span<const double> p);
  /// Rounds every parameter to the nearest float32 (the checkpoint precision).
  void round_to_float();

  /// Scalar reference path; throws std::out_of_range outside the room (with tolerance).
  Eigen::Matrix<double, kChannels, 1> forward(const Vec3& x) const;

  /// Batched evaluation of the 3 x N points. `cache` (optional) records what backward needs.
  JetBatch evaluate(const Eigen::Matrix3Xd& x, int order, ForwardCache* cache = nullptr) const;

  /// Accumulates d(loss)/d(theta) into `grad` given the loss adjoint of every evaluated jet entry.
  /// `adjoint.order` may be lower than the recorded order.
  void backward(const ForwardCache& cache, const JetBatch& adjoint, std::span<double> grad) const;

  void save(const std::filesystem::path& path) const;
  static NeuralField load(const std::filesystem::path& path);

  bool operator==(const NeuralField& o) const {
    return cfg_ == o.cfg_ && room_ == o.room_ && seed_ == o.seed_ && params_ == o.params_;
  }

  /// Maps physical coordinates into [-1, 1]^3.
  Vec3 normalize(const Vec3& x) const;
  void check_inside(const Vec3& x) const;

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t offset = 0;  ///< start of W in params_; b follows at offset + in * out
  };

  NetworkConfig cfg_;
  Box room_;
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  Eigen::MatrixXd fourier_B_;  ///< fourier_features x 3, applied to normalized inputs

  void build_layout();
  void init_fourier();
  Eigen::Map<const Eigen::MatrixXd> W(std::size_t l) const;
  Eigen::Map<const Eigen::VectorXd> b(std::size_t l) const;
  JetBatch encode(const Eigen::Matrix3Xd& x, Eigen::Index begin, Eigen::Index count, int order) const;
  JetBatch evaluate_chunk(const Eigen::Matrix3Xd& x, Eigen::Index begin, Eigen::Index count, int order,
                          Cache* cache) const;
  void backward_chunk(const Cache& cache, const JetBatch& adjoint, std::span<double> grad) const;
};

}  // namespace bos
