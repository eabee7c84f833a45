#pragma once

#include "bostomo/common.hpp"

#include <array>
#include <cmath>

// Small fixed-size vector helpers that work for double and for taped scalars alike.
namespace bos::vops {

template <class S>
using V3 = std::array<S, 3>;

template <class S>
V3<S> from(const Vec3& v) {
  return {S(v[0]), S(v[1]), S(v[2])};
}

inline Vec3 to_vec3(const V3<double>& v) { return Vec3(v[0], v[1], v[2]); }

template <class S>
V3<S> add(const V3<S>& a, const V3<S>& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

template <class S>
V3<S> sub(const V3<S>& a, const V3<S>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

template <class S, class K>
V3<S> scale(const V3<S>& a, const K& k) {
  return {a[0] * k, a[1] * k, a[2] * k};
}

/// a + k * b
template <class S, class K>
V3<S> axpy(const V3<S>& a, const K& k, const V3<S>& b) {
  return {a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]};
}

template <class S>
S dot(const V3<S>& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class S>
S dot(const V3<S>& a, const V3<S>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class S>
S norm(const V3<S>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class S>
V3<S> lerp(const V3<S>& a, const V3<S>& b, const S& t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

}  // namespace bos::vops
