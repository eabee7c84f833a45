#pragma once

#include "bostomo/config.hpp"
#include "bostomo/fields.hpp"
#include "bostomo/network.hpp"
#include "bostomo/optim.hpp"
#include "bostomo/pinn.hpp"
#include "bostomo/renderer.hpp"
#include "bostomo/scene.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace bos {

/// Closed-form flow: T in K, p nondimensional, u in m/s, gradients per metre.
struct AnalyticFlow {
  std::function<double(const Vec3&)> T;
  std::function<Vec3(const Vec3&)> grad_T;
  std::function<double(const Vec3&)> p;
  std::function<Vec3(const Vec3&)> grad_p;
  std::function<Vec3(const Vec3&)> u;
  std::function<Eigen::Matrix3d(const Vec3&)> jac_u;  ///< (i, j) = du_i / dx_j
};

AnalyticFlow ambient_flow(const MediumConstants& m);

/// T = T0 + dT exp(-|x - c|^2 / 2 sigma^2); u = w0 exp(-r_perp^2 / 2 sigma^2) along -e_g, where
/// r_perp is the distance to the vertical axis through c; p balances buoyancy along e_g:
/// dp/dzeta = Ri T_nd with zeta = -e_g . (x - c) / L.
AnalyticFlow gaussian_plume(const PlumeConfig& cfg, const MediumConstants& m, const NondimConstants& c);

/// Largest relative mismatch between the gradient closures and central differences of
/// the value closures over `n` seeded points in `box`.
double derivative_mismatch(const AnalyticFlow& f, const Box& box, int n, std::uint64_t seed);

/// Throws std::runtime_error when derivative_mismatch exceeds `tol`.
void verify_derivatives(const AnalyticFlow& f, const Box& box, double tol = 1e-6);

FlowState truth_state(const AnalyticFlow& f, const Vec3& x, const MediumConstants& m, const NondimConstants& c);

/// Residuals of an analytic flow by central differences of its value closures (step h in metres).
ResidualTriple fd_residuals(const AnalyticFlow& f, const Vec3& x, const MediumConstants& m, const NondimConstants& c,
                            double h = 1e-3);

struct Measurement {
  Image ref;
  Image flow;
};

/// I_ref with T = T0 everywhere and I_flow with the flow temperature, at matched seeds.
/// `step` overrides the scene trace step for the measurement.
Measurement synthesize_measurement(const Scene& scene, const AnalyticFlow& f, int spp, std::uint64_t seed,
                                   double step);

/// Two node layers bracketing the boundary plane, `res` x `res` in-plane; channels
/// (T [K], p, u_x, u_y, u_z [m/s]).
VoxelGrid boundary_grid(const Scene& scene, const AnalyticFlow& f, int res = 64);

/// Node grid of n^3 points over the room with the same five channels.
VoxelGrid flow_grid(const Scene& scene, const std::function<FlowState(const Vec3&)>& sample, int n);
VoxelGrid flow_grid(const Scene& scene, const NeuralField& nf, int n);

struct FieldMetrics {
  double rmse = 0.0;
  double nrmse = 0.0;  ///< rmse / max-abs of the truth (0 when the truth is zero)
  double max_abs = 0.0;
};

/// T in K, p and u nondimensional (u as the vector error norm).
struct Metrics {
  FieldMetrics T;
  FieldMetrics p;
  FieldMetrics u;
};

nlohmann::json metrics_json(const Metrics& m);

using FlowSampler = std::function<FlowState(const Vec3&)>;

Eigen::Matrix3Xd eval_grid_points(const Box& room, int n);

/// Predictions are nondimensional FlowStates; the truth is sampled on the same n^3 node grid.
Metrics evaluate(const std::vector<FlowState>& pred, const std::vector<FlowState>& truth, const MediumConstants& m);
Metrics evaluate(const FlowSampler& pred, const AnalyticFlow& truth, const Scene& scene, int n);
Metrics evaluate(const NeuralField& nf, const AnalyticFlow& truth, const Scene& scene, int n);

/// Error magnitudes on the n^3 grid: |T err| [K], |p err|, |u err|.
VoxelGrid error_volume(const NeuralField& nf, const AnalyticFlow& truth, const Scene& scene, int n);

struct ResidualStats {
  double mass_rms = 0.0;
  double mom_rms = 0.0;
  double heat_rms = 0.0;
};
ResidualStats truth_residual_stats(const AnalyticFlow& f, const Scene& scene, int n);
ResidualStats network_residual_stats(const NeuralField& nf, const Scene& scene, int n);

struct RegimeResult {
  std::string name;
  LossWeights weights;
  Metrics metrics;
  ResidualStats residuals;
  LossTerms final_terms;
};

struct StudyReport {
  std::vector<RegimeResult> regimes;
  ResidualStats truth_residuals;
  double p_ratio = 0.0;  ///< BOS+boundary p RMSE / combined p RMSE
  double u_ratio = 0.0;
};

/// BOS+boundary (l1, l2, 0), PDE+boundary (0, l2, l3) and combined (l1, l2, l3).
std::vector<std::pair<std::string, LossWeights>> regime_profiles(const LossWeights& w);

struct StudyOptions {
  std::filesystem::path out_dir;
  int eval_grid = 32;
  std::function<void(const std::string&, const HistoryRow&)> on_iteration;
};

/// Trains the three regimes with identical seeds and iterations and writes per-regime
/// directories, error volumes, report.csv and summary.txt under out_dir.
StudyReport regime_study(const Scene& scene, const AnalyticFlow& truth, const Image& measurement,
                         const BoundaryReference& boundary, const TrainConfig& base, const StudyOptions& opts);

void write_report(const std::filesystem::path& dir, const StudyReport& r);

}  // namespace bos
