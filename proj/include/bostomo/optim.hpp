#pragma once

#include "bostomo/config.hpp"
#include "bostomo/network.hpp"
#include "bostomo/pinn.hpp"
#include "bostomo/renderer.hpp"
#include "bostomo/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace bos {

/// AdaBelief state: s tracks the spread of the gradient around its running mean.
struct OptState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> s;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-16;

  bool operator==(const OptState&) const = default;
};

OptState make_opt_state(std::size_t n, const TrainConfig& cfg);

/// m <- b1 m + (1 - b1) g;  s <- b2 s + (1 - b2) (g - m)^2 + eps;
/// theta <- theta - lr * m_hat / (sqrt(s_hat) + eps) with bias-corrected m_hat, s_hat.
void optimizer_step(OptState& st, std::span<double> theta, std::span<const double> grad, double lr);

/// Constant, or cosine-decayed to zero over cfg.iterations.
double learning_rate_at(const TrainConfig& cfg, std::int64_t iteration);

void save_opt_state(const std::filesystem::path& path, const OptState& st);
OptState load_opt_state(const std::filesystem::path& path);

Eigen::Matrix3Xd sample_collocation(const Box& room, int n, std::uint64_t seed, std::int64_t iteration);
/// Uniform without replacement; with replacement when n exceeds the pixel count.
std::vector<PixelIndex> sample_pixels(const Camera& cam, int n, std::uint64_t seed, std::int64_t iteration);
Eigen::Matrix3Xd sample_boundary_points(const PlaneRect& rect, int n, std::uint64_t seed, std::int64_t iteration);

/// Deterministic batches of one iteration. `boundary` may be null when its weight is zero.
Batches sample_batches(const Scene& scene, const TrainConfig& cfg, const BoundaryReference* boundary,
                       std::int64_t iteration);

/// Render seed used by the BOS loss at `iteration`.
std::uint64_t render_seed_at(const TrainConfig& cfg, std::int64_t iteration);

struct HistoryRow {
  std::int64_t iteration = 0;
  LossTerms terms;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::int64_t iteration, const LossTerms& t, const std::string& what)
      : std::runtime_error(what), iteration(iteration), terms(t) {}
  std::int64_t iteration;
  LossTerms terms;
};

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  ///< loss.csv, checkpoints/, final.bin
  std::optional<std::filesystem::path> resume;   ///< checkpoint whose .opt sidecar holds the optimizer
  std::function<void(const HistoryRow&)> on_iteration;
};

struct TrainResult {
  NeuralField field;
  OptState state;
  std::vector<HistoryRow> history;
};

/// sample -> total_loss -> gradient -> optimizer step, for cfg.iterations steps. Parameters
/// are kept at float32 precision so checkpoints resume bit-exactly.
TrainResult train(const Scene& scene, const Image& measurement, const BoundaryReference* boundary,
                  const TrainConfig& cfg, const TrainOptions& opts = {});

/// Path of the optimizer sidecar next to a checkpoint.
std::filesystem::path opt_state_path(const std::filesystem::path& checkpoint);

}  // namespace bos
