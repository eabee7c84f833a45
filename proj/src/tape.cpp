#include "bostomo/tape.hpp"

#include <stdexcept>

namespace bos {

Var Tape::leaf(double value) {
  const auto id = static_cast<std::int32_t>(ops_.size());
  ops_.push_back({Op::Leaf, -1, -1, 0.0});
  values_.push_back(value);
  leaves_.push_back(id);
  return Var(this, id, value);
}

Var Tape::record(Op op, std::int32_t a, std::int32_t b, double c, double value) {
  const auto id = static_cast<std::int32_t>(ops_.size());
  ops_.push_back({op, a, b, c});
  values_.push_back(value);
  return Var(this, id, value);
}

void Tape::clear() {
  ops_.clear();
  values_.clear();
  leaves_.clear();
}

void Tape::reserve(std::size_t n) {
  ops_.reserve(n);
  values_.reserve(n);
}

double Tape::eval(const Rec& r) const {
  const double a = r.a >= 0 ? values_[r.a] : 0.0;
  const double b = r.b >= 0 ? values_[r.b] : 0.0;
  switch (r.op) {
    case Op::Leaf: throw std::logic_error("leaf has no rule");
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div: return a / b;
    case Op::Neg: return -a;
    case Op::AddC: return a + r.c;
    case Op::MulC: return a * r.c;
    case Op::DivC: return a / r.c;
    case Op::CSub: return r.c - a;
    case Op::CDiv: return r.c / a;
    case Op::Sqrt: return std::sqrt(a);
    case Op::Exp: return std::exp(a);
    case Op::Log: return std::log(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Square: return a * a;
  }
  throw std::logic_error("unknown op");
}

std::vector<double> Tape::adjoints(const Var& out, double seed) const {
  std::vector<double> adj(ops_.size(), 0.0);
  if (!out.tape) return adj;
  if (out.tape != this) throw std::invalid_argument("variable belongs to another tape");
  adj[out.id] = seed;
  for (std::int32_t i = out.id; i >= 0; --i) {
    const double g = adj[i];
    if (g == 0.0) continue;
    const Rec& r = ops_[i];
    const double y = values_[i];
    switch (r.op) {
      case Op::Leaf: break;
      case Op::Add:
        adj[r.a] += g;
        adj[r.b] += g;
        break;
      case Op::Sub:
        adj[r.a] += g;
        adj[r.b] -= g;
        break;
      case Op::Mul:
        adj[r.a] += g * values_[r.b];
        adj[r.b] += g * values_[r.a];
        break;
      case Op::Div: {
        const double inv = 1.0 / values_[r.b];
        adj[r.a] += g * inv;
        adj[r.b] -= g * y * inv;
        break;
      }
      case Op::Neg: adj[r.a] -= g; break;
      case Op::AddC: adj[r.a] += g; break;
      case Op::MulC: adj[r.a] += g * r.c; break;
      case Op::DivC: adj[r.a] += g / r.c; break;
      case Op::CSub: adj[r.a] -= g; break;
      case Op::CDiv: adj[r.a] -= g * y / values_[r.a]; break;
      // Subgradient 0 at the origin keeps zero-length segments harmless.
      case Op::Sqrt: adj[r.a] += y > 0.0 ? g * 0.5 / y : 0.0; break;
      case Op::Exp: adj[r.a] += g * y; break;
      case Op::Log: adj[r.a] += g / values_[r.a]; break;
      case Op::Tanh: adj[r.a] += g * (1.0 - y * y); break;
      case Op::Sin: adj[r.a] += g * std::cos(values_[r.a]); break;
      case Op::Cos: adj[r.a] -= g * std::sin(values_[r.a]); break;
      case Op::Square: adj[r.a] += 2.0 * g * values_[r.a]; break;
    }
  }
  return adj;
}

std::vector<double> Tape::leaf_gradient(const Var& out, double seed) const {
  const std::vector<double> adj = adjoints(out, seed);
  std::vector<double> g(leaves_.size());
  for (std::size_t k = 0; k < leaves_.size(); ++k) g[k] = adj[leaves_[k]];
  return g;
}

double Tape::replay(std::span<const double> leaf_values, const Var& out) {
  if (leaf_values.size() != leaves_.size()) throw std::invalid_argument("leaf count mismatch");
  std::size_t next_leaf = 0;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (ops_[i].op == Op::Leaf) values_[i] = leaf_values[next_leaf++];
    else values_[i] = eval(ops_[i]);
  }
  return out.tape ? values_[out.id] : out.v;
}

}  // namespace bos
