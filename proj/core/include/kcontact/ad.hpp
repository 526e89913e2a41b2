#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kcontact/expr.hpp"

namespace kcontact {

/// Value, gradient and (optionally) Hessian of an expression at a point, with
/// respect to a chosen list of variables. The Hessian is stored dense and is
/// exactly symmetric.
struct DualValue {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  // row major, size n*n when requested
  std::size_t n = 0;

  double d(std::size_t i) const { return gradient[i]; }
  double dd(std::size_t i, std::size_t j) const { return hessian[i * n + j]; }
};

/// Scratch space for CompiledExpr. Reusing one across calls avoids allocation.
class EvalWorkspace {
 public:
  std::vector<double> val;
  std::vector<double> grad;
  std::vector<double> hess;
  std::vector<int> seed;
};

/// Expression flattened into a straight-line tape and differentiated in
/// forward mode. Const and thread-compatible: distinct workspaces may be used
/// concurrently.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  double value(std::span<const double> point, EvalWorkspace& ws) const;

  /// order is 1 (gradient) or 2 (gradient and Hessian).
  void derive(std::span<const double> point, std::span<const std::size_t> wrt, int order,
              EvalWorkspace& ws, DualValue& out) const;

  std::size_t tape_size() const { return tape_.size(); }
  const Expr& source() const { return source_; }

 private:
  enum class Op : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Log, Sqrt, Abs };
  struct Instr {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double c = 0.0;  // constant value or variable index
  };

  std::uint32_t emit(const Expr& e);
  [[noreturn]] void domain_error(std::size_t slot, const char* what) const;

  Expr source_;
  std::vector<Instr> tape_;
  std::vector<Expr> nodes_;  // subexpression per slot, for error messages
};

/// Convenience wrappers that compile on the fly.
DualValue differentiate(const Expr& e, std::span<const double> point,
                        std::span<const std::size_t> wrt, int order);
std::vector<double> gradient(const Expr& e, std::span<const double> point,
                             std::span<const std::size_t> wrt);

}  // namespace kcontact
