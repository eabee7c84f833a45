#pragma once

#include "bostomo/scene.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bos {

/// Central difference at steps h and h/2 combined by Richardson extrapolation.
double richardson_derivative(const std::function<double(double)>& f, double x, double h);

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int checks = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool passed() const;
};

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor);

/// Fixed-seed finite-difference suite: spatial Jacobian and Laplacian of a random tanh
/// network, parameter gradients of the PDE and boundary losses, and the BOS loss gradient
/// through the renderer on a 10-pixel batch of `scene`.
GradcheckReport run_gradcheck(const Scene& scene, std::uint64_t seed);

}  // namespace bos
