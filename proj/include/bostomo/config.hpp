#pragma once

#include "bostomo/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bos {

enum class Integrator { Nonlinear, Quasilinear };

/// Ray integration settings. `step` is the ray-parameter step (t with dt = ds / eta);
/// the quasi-linear scheme lays its grid out in arc length along the straight query line.
struct TraceConfig {
  double step = 0.01;
  int max_steps = 100000;
  Integrator integrator = Integrator::Quasilinear;

  bool operator==(const TraceConfig&) const = default;
};

struct RenderSettings {
  bool inverse_square = false;  ///< 1/|r|^2 instead of the 1/|r| weight
  bool trace_projector_leg = false;

  bool operator==(const RenderSettings&) const = default;
};

enum class Activation { Tanh, Identity, Sine };

struct NetworkConfig {
  std::vector<int> hidden{128, 128, 128, 128};
  Activation activation = Activation::Tanh;
  int fourier_features = 0;  ///< number of random frequencies; 0 disables the encoding
  double fourier_scale = 1.0;

  bool operator==(const NetworkConfig&) const = default;
};

/// lambda_* weight the three loss terms, gamma_* the three residuals.
struct LossWeights {
  double lambda_bos = 1.0;
  double lambda_boundary = 1.0;
  double lambda_pde = 1.0;
  double gamma_mass = 1.0;
  double gamma_mom = 1.0;
  double gamma_heat = 1.0;

  bool operator==(const LossWeights&) const = default;
};

enum class BoundaryNormalization { ReferenceMax, OwnMax };

struct BoundaryLossSettings {
  BoundaryNormalization normalization = BoundaryNormalization::ReferenceMax;
  /// Lower bound on the per-field normalizer. 0 makes an all-zero reference field an error.
  double min_scale = 0.0;

  bool operator==(const BoundaryLossSettings&) const = default;
};

struct BatchSizes {
  int collocation = 8192;
  int pixels = 5000;
  int boundary = 4096;

  bool operator==(const BatchSizes&) const = default;
};

struct TrainConfig {
  int iterations = 10000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-16;
  bool cosine_decay = false;
  BatchSizes batch;
  std::uint64_t init_seed = 1;
  std::uint64_t sampling_seed = 2;
  std::uint64_t render_seed = 3;
  int spp = 2;
  bool noisy_render_seeds = false;
  double render_step = 0.01;  ///< quasi-linear step used inside the training loss [m]
  int checkpoint_every = 1000;
  int log_every = 1;
  LossWeights weights;
  BoundaryLossSettings boundary;
  NetworkConfig network;

  bool operator==(const TrainConfig&) const = default;
};

/// Synthetic ground truth used by the evaluate and study commands.
struct PlumeConfig {
  Vec3 center = Vec3(0.8, 0.0, 1.5);
  double sigma = 0.5;
  double delta_T = 30.0;
  double w0 = 1.0;

  bool operator==(const PlumeConfig&) const = default;
};

struct BenchmarkConfig {
  PlumeConfig plume;
  int measurement_spp = 2;
  std::uint64_t measurement_seed = 3;
  double measurement_step = 0.01;
  int eval_grid = 32;

  bool operator==(const BenchmarkConfig&) const = default;
};

std::string to_string(Integrator i);
std::string to_string(Activation a);
std::string to_string(BoundaryNormalization n);
/// Throws ValidationError for unknown names.
Activation activation_from(const std::string& s);

}  // namespace bos
