#pragma once

#include "bostomo/config.hpp"
#include "bostomo/constants.hpp"
#include "bostomo/fields.hpp"
#include "bostomo/network.hpp"
#include "bostomo/renderer.hpp"
#include "bostomo/scene.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

namespace bos {

/// Nondimensional flow state: T = T0 + (T_in - T0) * T_nd, velocity in units of U.
struct FlowState {
  double T_nd = 0.0;
  double p = 0.0;
  Vec3 u = Vec3::Zero();
};

template <class S>
struct ResidualT {
  S mass;
  std::array<S, 3> mom;
  S heat;
};
using ResidualTriple = ResidualT<double>;

FlowState field_eval(const NeuralField& nf, const Vec3& x);

/// Jet of the five output channels at one point; derivatives are per metre.
template <class S>
struct ChannelJet {
  std::array<S, kChannels> v;
  std::array<std::array<S, 3>, kChannels> d1;
  std::array<std::array<S, 3>, kChannels> d2;
};

/// Steady Boussinesq residuals in x_hat = x / L:
///   r_mass = div u
///   r_mom  = (u . grad) u + grad p - lap u / Re + Ri T_nd e_g
///   r_heat = (u . grad) T_nd - lap T_nd / Pe
template <class S>
ResidualT<S> residuals_from_jet(const ChannelJet<S>& j, const NondimConstants& c) {
  const double L = c.L, L2 = c.L * c.L;
  auto grad = [&](int ch, int k) { return j.d1[ch][k] * L; };
  auto lap = [&](int ch) { return (j.d2[ch][0] + j.d2[ch][1] + j.d2[ch][2]) * L2; };
  ResidualT<S> r;
  r.mass = grad(kUx, 0) + grad(kUy, 1) + grad(kUz, 2);
  for (int i = 0; i < 3; ++i) {
    S adv = j.v[kUx] * grad(kUx + i, 0) + j.v[kUy] * grad(kUx + i, 1) + j.v[kUz] * grad(kUx + i, 2);
    r.mom[i] = adv + grad(kP, i) - lap(kUx + i) / c.Re + j.v[kT] * (c.Ri * c.e_g[i]);
  }
  r.heat = j.v[kUx] * grad(kT, 0) + j.v[kUy] * grad(kT, 1) + j.v[kUz] * grad(kT, 2) - lap(kT) / c.Pe;
  return r;
}

template <class S>
S residual_loss(const ResidualT<S>& r, const LossWeights& w) {
  return w.gamma_mass * (r.mass * r.mass) +
         w.gamma_mom * (r.mom[0] * r.mom[0] + r.mom[1] * r.mom[1] + r.mom[2] * r.mom[2]) +
         w.gamma_heat * (r.heat * r.heat);
}

ResidualTriple residuals(const NeuralField& nf, const Vec3& x, const NondimConstants& c);
std::vector<ResidualTriple> residuals(const NeuralField& nf, const Eigen::Matrix3Xd& x, const NondimConstants& c);

/// Sum over the batch of gamma-weighted squared residuals. When `grad` is non-empty the
/// parameter gradient is accumulated into it.
double loss_pde(const NeuralField& nf, const Eigen::Matrix3Xd& points, const LossWeights& w,
                const NondimConstants& c, std::span<double> grad = {});

/// Per-field normalizers of the boundary loss: T_nd, p, and |u| as one vector field.
struct BoundaryScales {
  double T = 1.0;
  double p = 1.0;
  double u = 1.0;
};

/// Boundary sample set: positions and nondimensional reference channels (5 x N).
struct BoundarySamples {
  Eigen::Matrix3Xd x;
  Eigen::MatrixXd ref;
};

/// Reference boundary data on the plane Gamma: a VOXGRID with channels
/// (T [K], p [nondimensional], u_x, u_y, u_z [m/s]) whose box contains the plane rectangle.
struct BoundaryReference {
  VoxelGrid grid;
  BoundaryScales scales;

  /// Nondimensional channels at x.
  Eigen::Matrix<double, kChannels, 1> at(const Vec3& x, const MediumConstants& m, const NondimConstants& c) const;
  BoundarySamples sample(const Eigen::Matrix3Xd& x, const MediumConstants& m, const NondimConstants& c) const;
};

/// Rectangle of Gamma clipped to the room.
struct PlaneRect {
  int axis = 0;
  double offset = 0.0;
  Vec3 lo;  ///< corner with the fixed axis at `offset`
  Vec3 hi;
};
PlaneRect boundary_rect(const Scene& scene);

/// Max-abs of each reference field over a fixed 64 x 64 lattice on Gamma, floored by
/// `min_scale`. Throws ValidationError when a normalizer would be zero.
BoundaryScales boundary_scales(const VoxelGrid& grid, const Scene& scene, double min_scale);
BoundaryReference make_boundary_reference(VoxelGrid grid, const Scene& scene, double min_scale);

/// Squared error between normalized prediction and normalized reference, summed over
/// samples and fields. `pred` and `ref` are 5 x N nondimensional.
template <class S>
S boundary_loss_values(const std::vector<std::array<S, kChannels>>& pred, const Eigen::MatrixXd& ref,
                       const BoundaryScales& scales, BoundaryNormalization mode);

double loss_boundary(const NeuralField& nf, const BoundarySamples& samples, const BoundaryScales& scales,
                     BoundaryNormalization mode, std::span<double> grad = {});

/// Everything the BOS loss needs besides the network.
struct BosProblem {
  const Scene* scene = nullptr;
  const Image* measured = nullptr;
  int spp = 2;
  std::uint64_t seed = 3;
  double step = 0.01;  ///< quasi-linear step inside the loss [m]
};

/// Sum over the pixel batch of (I_flow - I(eta))^2 with eta from the network temperature.
/// Gradients follow the frozen straight query lines of the quasi-linear scheme.
double loss_bos(const NeuralField& nf, const BosProblem& prob, std::span<const PixelIndex> pixels,
                std::span<double> grad = {}, std::vector<double>* rendered = nullptr);

/// Forward render of every pixel through the network temperature (quasi-linear tracing).
Image render_image_neural(const NeuralField& nf, const Scene& scene, int spp, std::uint64_t seed, double step);

/// Refractive index field of a network (value and gradient through the temperature head).
class NeuralEtaField final : public ScalarField {
 public:
  NeuralEtaField(const NeuralField& nf, const MediumConstants& m) : nf_(nf), m_(m) {}
  double value(const Vec3& x) const override;
  Vec3 gradient(const Vec3& x) const override;
  std::pair<double, Vec3> value_and_gradient(const Vec3& x) const override;

 private:
  const NeuralField& nf_;
  MediumConstants m_;
};

struct LossTerms {
  double bos = 0.0;
  double boundary = 0.0;
  double pde = 0.0;
  double total = 0.0;
};

struct Batches {
  Eigen::Matrix3Xd collocation;
  std::vector<PixelIndex> pixels;
  BoundarySamples boundary;
};

/// lambda-weighted sum of the three terms; zero-weight terms are skipped. Gradients are
/// accumulated in the fixed order PDE, boundary, BOS. Throws when all weights are zero.
LossTerms total_loss(const NeuralField& nf, const BosProblem& bos, const Batches& batches, const LossWeights& w,
                     const NondimConstants& c, BoundaryNormalization mode, const BoundaryScales& scales,
                     std::span<double> grad = {});

}  // namespace bos
