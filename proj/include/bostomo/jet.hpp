#pragma once

#include "bostomo/common.hpp"

#include <array>
#include <cmath>
#include <type_traits>

namespace bos {

/// Second-order forward-mode number over the three spatial inputs: value, gradient and
/// the diagonal of the Hessian (enough for Laplacians).
struct Jet {
  double v = 0.0;
  std::array<double, 3> d{0.0, 0.0, 0.0};
  std::array<double, 3> dd{0.0, 0.0, 0.0};

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: constants promote implicitly

  static Jet variable(double value, int axis) {
    Jet j(value);
    j.d[axis] = 1.0;
    return j;
  }
};

inline double value_of(const Jet& j) { return j.v; }

namespace jet_detail {
/// Applies a smooth scalar function given f, f', f'' at the primal value.
inline Jet chain(const Jet& a, double f, double f1, double f2) {
  Jet r(f);
  for (int k = 0; k < 3; ++k) {
    r.d[k] = f1 * a.d[k];
    r.dd[k] = f2 * a.d[k] * a.d[k] + f1 * a.dd[k];
  }
  return r;
}
}  // namespace jet_detail

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r(a.v + b.v);
  for (int k = 0; k < 3; ++k) {
    r.d[k] = a.d[k] + b.d[k];
    r.dd[k] = a.dd[k] + b.dd[k];
  }
  return r;
}

inline Jet operator-(const Jet& a) {
  Jet r(-a.v);
  for (int k = 0; k < 3; ++k) {
    r.d[k] = -a.d[k];
    r.dd[k] = -a.dd[k];
  }
  return r;
}

inline Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.v * b.v);
  for (int k = 0; k < 3; ++k) {
    r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    r.dd[k] = a.dd[k] * b.v + 2.0 * a.d[k] * b.d[k] + a.v * b.dd[k];
  }
  return r;
}

inline Jet operator/(const Jet& a, const Jet& b) {
  const double inv = 1.0 / b.v;
  return a * jet_detail::chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet operator+(const Jet& a, double b) { return a + Jet(b); }
inline Jet operator+(double a, const Jet& b) { return Jet(a) + b; }
inline Jet operator-(const Jet& a, double b) { return a - Jet(b); }
inline Jet operator-(double a, const Jet& b) { return Jet(a) - b; }
inline Jet operator*(const Jet& a, double b) { return a * Jet(b); }
inline Jet operator*(double a, const Jet& b) { return Jet(a) * b; }
inline Jet operator/(const Jet& a, double b) { return a / Jet(b); }
inline Jet operator/(double a, const Jet& b) { return Jet(a) / b; }

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }

inline Jet tanh(const Jet& a) {
  const double t = std::tanh(a.v);
  const double t1 = 1.0 - t * t;
  return jet_detail::chain(a, t, t1, -2.0 * t * t1);
}
inline Jet sin(const Jet& a) { return jet_detail::chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
inline Jet cos(const Jet& a) { return jet_detail::chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
inline Jet exp(const Jet& a) {
  const double e = std::exp(a.v);
  return jet_detail::chain(a, e, e, e);
}
inline Jet log(const Jet& a) { return jet_detail::chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet sqrt(const Jet& a) {
  const double s = std::sqrt(a.v);
  return jet_detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

/// Values, Jacobian and Hessian diagonal of f at x; f maps std::array<Jet, 3> to a
/// single Jet or to a std::array of Jets.
template <class F>
auto spatial_jet(F&& f, const Vec3& x) {
  const std::array<Jet, 3> in{Jet::variable(x[0], 0), Jet::variable(x[1], 1), Jet::variable(x[2], 2)};
  return f(in);
}

}  // namespace bos
