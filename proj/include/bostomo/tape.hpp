#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace bos {

class Tape;

/// Taped scalar. A Var without a tape is a constant and records nothing.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;
  double v = 0.0;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: implicit constants keep templated code readable
  Var(Tape* t, std::int32_t i, double value) : tape(t), id(i), v(value) {}

  bool is_constant() const { return tape == nullptr; }
  double value() const { return v; }
};

inline double value_of(const Var& x) { return x.v; }

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddC,
  MulC,
  DivC,
  CSub,
  CDiv,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sin,
  Cos,
  Square,
};

/// Wengert list for reverse accumulation. Values are stored alongside the operations so
/// the list can be replayed from new leaf values.
class Tape {
 public:
  Var leaf(double value);
  Var record(Op op, std::int32_t a, std::int32_t b, double c, double value);

  std::size_t size() const { return ops_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }
  std::span<const std::int32_t> leaves() const { return leaves_; }
  double value(std::int32_t id) const { return values_[id]; }
  void clear();
  void reserve(std::size_t n);

  /// Adjoints of every node for d(out)/d(node), seeded with `seed` at `out`.
  std::vector<double> adjoints(const Var& out, double seed = 1.0) const;
  /// Adjoints of the leaves only, in creation order.
  std::vector<double> leaf_gradient(const Var& out, double seed = 1.0) const;

  /// Recomputes every node from new leaf values (creation order); returns the value of `out`.
  double replay(std::span<const double> leaf_values, const Var& out);

 private:
  struct Rec {
    Op op;
    std::int32_t a;
    std::int32_t b;
    double c;
  };
  std::vector<Rec> ops_;
  std::vector<double> values_;
  std::vector<std::int32_t> leaves_;

  double eval(const Rec& r) const;
};

/// A constant with the same value; gradients never flow through it.
inline Var detach(const Var& x) { return Var(x.v); }

namespace tape_detail {
inline Var unary(Op op, const Var& a, double value) {
  if (!a.tape) return Var(value);
  return a.tape->record(op, a.id, -1, 0.0, value);
}
}  // namespace tape_detail

inline Var operator+(const Var& a, const Var& b) {
  if (!a.tape && !b.tape) return Var(a.v + b.v);
  if (!b.tape) return a.tape->record(Op::AddC, a.id, -1, b.v, a.v + b.v);
  if (!a.tape) return b.tape->record(Op::AddC, b.id, -1, a.v, a.v + b.v);
  return a.tape->record(Op::Add, a.id, b.id, 0.0, a.v + b.v);
}

inline Var operator-(const Var& a, const Var& b) {
  if (!a.tape && !b.tape) return Var(a.v - b.v);
  if (!b.tape) return a.tape->record(Op::AddC, a.id, -1, -b.v, a.v - b.v);
  if (!a.tape) return b.tape->record(Op::CSub, b.id, -1, a.v, a.v - b.v);
  return a.tape->record(Op::Sub, a.id, b.id, 0.0, a.v - b.v);
}

inline Var operator*(const Var& a, const Var& b) {
  if (!a.tape && !b.tape) return Var(a.v * b.v);
  if (!b.tape) return a.tape->record(Op::MulC, a.id, -1, b.v, a.v * b.v);
  if (!a.tape) return b.tape->record(Op::MulC, b.id, -1, a.v, a.v * b.v);
  return a.tape->record(Op::Mul, a.id, b.id, 0.0, a.v * b.v);
}

inline Var operator/(const Var& a, const Var& b) {
  if (!a.tape && !b.tape) return Var(a.v / b.v);
  if (!b.tape) return a.tape->record(Op::DivC, a.id, -1, b.v, a.v / b.v);
  if (!a.tape) return b.tape->record(Op::CDiv, b.id, -1, a.v, a.v / b.v);
  return a.tape->record(Op::Div, a.id, b.id, 0.0, a.v / b.v);
}

inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }
inline Var operator-(const Var& a) { return tape_detail::unary(Op::Neg, a, -a.v); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline Var sqrt(const Var& a) { return tape_detail::unary(Op::Sqrt, a, std::sqrt(a.v)); }
inline Var exp(const Var& a) { return tape_detail::unary(Op::Exp, a, std::exp(a.v)); }
inline Var log(const Var& a) { return tape_detail::unary(Op::Log, a, std::log(a.v)); }
inline Var tanh(const Var& a) { return tape_detail::unary(Op::Tanh, a, std::tanh(a.v)); }
inline Var sin(const Var& a) { return tape_detail::unary(Op::Sin, a, std::sin(a.v)); }
inline Var cos(const Var& a) { return tape_detail::unary(Op::Cos, a, std::cos(a.v)); }
inline Var square(const Var& a) { return tape_detail::unary(Op::Square, a, a.v * a.v); }
inline double square(double a) { return a * a; }

}  // namespace bos
