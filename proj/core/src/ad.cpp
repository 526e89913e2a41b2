#include "kcontact/ad.hpp"

#include <cmath>
#include <unordered_map>

namespace kcontact {

CompiledExpr::CompiledExpr(const Expr& e) : source_(e) { emit(e); }

std::uint32_t CompiledExpr::emit(const Expr& e) {
  Instr in{};
  switch (e.kind()) {
    case NodeKind::Constant:
      in.op = Op::Const;
      in.c = e.constant_value();
      break;
    case NodeKind::Variable:
      in.op = Op::Var;
      in.a = static_cast<std::uint32_t>(e.variable_index());
      break;
    case NodeKind::Negate:
      in.op = Op::Neg;
      in.a = emit(e.lhs());
      break;
    case NodeKind::Call: {
      in.a = emit(e.lhs());
      switch (e.function()) {
        case Function::Sin: in.op = Op::Sin; break;
        case Function::Cos: in.op = Op::Cos; break;
        case Function::Exp: in.op = Op::Exp; break;
        case Function::Log: in.op = Op::Log; break;
        case Function::Sqrt: in.op = Op::Sqrt; break;
        case Function::Abs: in.op = Op::Abs; break;
      }
      break;
    }
    default: {
      in.a = emit(e.lhs());
      in.b = emit(e.rhs());
      switch (e.kind()) {
        case NodeKind::Add: in.op = Op::Add; break;
        case NodeKind::Sub: in.op = Op::Sub; break;
        case NodeKind::Mul: in.op = Op::Mul; break;
        case NodeKind::Div: in.op = Op::Div; break;
        default: in.op = Op::Pow; break;
      }
    }
  }
  tape_.push_back(in);
  nodes_.push_back(e);
  return static_cast<std::uint32_t>(tape_.size() - 1);
}

void CompiledExpr::domain_error(std::size_t slot, const char* what) const {
  throw DomainError(what, nodes_[slot].to_string());
}

namespace {
bool is_integer(double x) { return std::isfinite(x) && x == std::round(x); }

// a^b for integer b; squaring for small exponents, libm otherwise.
double ipow(double a, double b) {
  if (std::fabs(b) > 32) return std::pow(a, b);
  auto e = static_cast<long>(std::fabs(b));
  double r = 1.0, x = a;
  while (e) {
    if (e & 1) r *= x;
    x *= x;
    e >>= 1;
  }
  return b < 0 ? 1.0 / r : r;
}
}  // namespace

double CompiledExpr::value(std::span<const double> x, EvalWorkspace& ws) const {
  auto& v = ws.val;
  if (v.size() < tape_.size()) v.resize(tape_.size());
  for (std::size_t k = 0; k < tape_.size(); ++k) {
    const Instr& in = tape_[k];
    switch (in.op) {
      case Op::Const: v[k] = in.c; break;
      case Op::Var:
        if (in.a >= x.size()) throw BindingError("no value bound for '" + nodes_[k].variable_name() + "'");
        v[k] = x[in.a];
        break;
      case Op::Neg: v[k] = -v[in.a]; break;
      case Op::Add: v[k] = v[in.a] + v[in.b]; break;
      case Op::Sub: v[k] = v[in.a] - v[in.b]; break;
      case Op::Mul: v[k] = v[in.a] * v[in.b]; break;
      case Op::Div:
        if (v[in.b] == 0.0) domain_error(k, "division by zero");
        v[k] = v[in.a] / v[in.b];
        break;
      case Op::Pow: {
        double a = v[in.a], b = v[in.b];
        if (a < 0 && !is_integer(b)) domain_error(k, "non-integer power of a negative base");
        if (a == 0 && b < 0) domain_error(k, "negative power of zero");
        v[k] = is_integer(b) ? ipow(a, b) : std::pow(a, b);
        break;
      }
      case Op::Sin: v[k] = std::sin(v[in.a]); break;
      case Op::Cos: v[k] = std::cos(v[in.a]); break;
      case Op::Exp: v[k] = std::exp(v[in.a]); break;
      case Op::Log:
        if (v[in.a] <= 0) domain_error(k, "log of a non-positive value");
        v[k] = std::log(v[in.a]);
        break;
      case Op::Sqrt:
        if (v[in.a] < 0) domain_error(k, "sqrt of a negative value");
        v[k] = std::sqrt(v[in.a]);
        break;
      case Op::Abs: v[k] = std::fabs(v[in.a]); break;
    }
  }
  return v[tape_.size() - 1];
}

// Forward mode: every slot carries its value, gradient (n) and, for order 2,
// the upper triangle of its Hessian in an n*n block. Unary functions share
// one chain-rule kernel driven by f', f''.
void CompiledExpr::derive(std::span<const double> x, std::span<const std::size_t> wrt, int order,
                          EvalWorkspace& ws, DualValue& out) const {
  const std::size_t n = wrt.size();
  const std::size_t m = tape_.size();
  const bool second = order >= 2;
  auto& v = ws.val;
  auto& g = ws.grad;
  auto& h = ws.hess;
  if (v.size() < m) v.resize(m);
  if (g.size() < m * n) g.resize(m * n);
  if (second && h.size() < m * n * n) h.resize(m * n * n);

  std::size_t max_var = 0;
  for (std::size_t w : wrt) max_var = std::max(max_var, w + 1);
  ws.seed.assign(std::max(max_var, x.size()), -1);
  for (std::size_t j = 0; j < n; ++j) ws.seed[wrt[j]] = static_cast<int>(j);

  auto G = [&](std::size_t k) { return g.data() + k * n; };
  auto H = [&](std::size_t k) { return h.data() + k * n * n; };

  auto zero = [&](std::size_t k) {
    std::fill(G(k), G(k) + n, 0.0);
    if (second) std::fill(H(k), H(k) + n * n, 0.0);
  };

  // r = f(a): g_r = f' g_a, H_r = f' H_a + f'' g_a g_a^T
  auto unary = [&](std::size_t k, std::size_t a, double f1, double f2) {
    double* gr = G(k);
    const double* ga = G(a);
    for (std::size_t i = 0; i < n; ++i) gr[i] = f1 * ga[i];
    if (!second) return;
    double* hr = H(k);
    const double* ha = H(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) hr[i * n + j] = f1 * ha[i * n + j] + f2 * ga[i] * ga[j];
  };

  for (std::size_t k = 0; k < m; ++k) {
    const Instr& in = tape_[k];
    switch (in.op) {
      case Op::Const:
        v[k] = in.c;
        zero(k);
        break;
      case Op::Var: {
        if (in.a >= x.size()) throw BindingError("no value bound for '" + nodes_[k].variable_name() + "'");
        v[k] = x[in.a];
        zero(k);
        int s = in.a < ws.seed.size() ? ws.seed[in.a] : -1;
        if (s >= 0) G(k)[s] = 1.0;
        break;
      }
      case Op::Neg: v[k] = -v[in.a]; unary(k, in.a, -1.0, 0.0); break;
      case Op::Add:
      case Op::Sub: {
        double sgn = in.op == Op::Add ? 1.0 : -1.0;
        v[k] = v[in.a] + sgn * v[in.b];
        double* gr = G(k);
        const double *ga = G(in.a), *gb = G(in.b);
        for (std::size_t i = 0; i < n; ++i) gr[i] = ga[i] + sgn * gb[i];
        if (second) {
          double* hr = H(k);
          const double *ha = H(in.a), *hb = H(in.b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) hr[i * n + j] = ha[i * n + j] + sgn * hb[i * n + j];
        }
        break;
      }
      case Op::Mul: {
        double a = v[in.a], b = v[in.b];
        v[k] = a * b;
        double* gr = G(k);
        const double *ga = G(in.a), *gb = G(in.b);
        for (std::size_t i = 0; i < n; ++i) gr[i] = a * gb[i] + b * ga[i];
        if (second) {
          double* hr = H(k);
          const double *ha = H(in.a), *hb = H(in.b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
              hr[i * n + j] = a * hb[i * n + j] + b * ha[i * n + j] + ga[i] * gb[j] + ga[j] * gb[i];
        }
        break;
      }
      case Op::Div: {
        double a = v[in.a], b = v[in.b];
        if (b == 0.0) domain_error(k, "division by zero");
        double r = a / b;
        v[k] = r;
        double* gr = G(k);
        const double *ga = G(in.a), *gb = G(in.b);
        for (std::size_t i = 0; i < n; ++i) gr[i] = (ga[i] - r * gb[i]) / b;
        if (second) {
          // r b = a  =>  H_r = (H_a - r H_b - g_r g_b^T - g_b g_r^T) / b
          double* hr = H(k);
          const double *ha = H(in.a), *hb = H(in.b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j)
              hr[i * n + j] =
                  (ha[i * n + j] - r * hb[i * n + j] - gr[i] * gb[j] - gb[i] * gr[j]) / b;
        }
        break;
      }
      case Op::Pow: {
        double a = v[in.a], b = v[in.b];
        const double* gb = G(in.b);
        bool const_exp = true;
        for (std::size_t i = 0; i < n && const_exp; ++i) const_exp = gb[i] == 0.0;
        if (const_exp && second) {
          const double* hb = H(in.b);
          for (std::size_t i = 0; i < n * n && const_exp; ++i) const_exp = hb[i] == 0.0;
        }
        if (const_exp && is_integer(b)) {
          if (a == 0 && b < 0) domain_error(k, "negative power of zero");
          v[k] = ipow(a, b);
          double f1 = b == 0 ? 0.0 : b * ipow(a, b - 1);
          double f2 = (b == 0 || b == 1) ? 0.0 : b * (b - 1) * ipow(a, b - 2);
          if (!std::isfinite(f1) || (second && !std::isfinite(f2)))
            domain_error(k, "power not differentiable at zero");
          unary(k, in.a, f1, f2);
          break;
        }
        if (a <= 0) domain_error(k, "non-integer power of a non-positive base");
        double r = std::pow(a, b);
        double la = std::log(a);
        v[k] = r;
        if (const_exp) {
          unary(k, in.a, b * std::pow(a, b - 1), b * (b - 1) * std::pow(a, b - 2));
          break;
        }
        // r = exp(b log a): with w = b log a, g_w = b g_a / a + log a g_b
        const double* ga = G(in.a);
        double* gr = G(k);
        std::vector<double> gw(n);
        for (std::size_t i = 0; i < n; ++i) gw[i] = b * ga[i] / a + la * gb[i];
        for (std::size_t i = 0; i < n; ++i) gr[i] = r * gw[i];
        if (second) {
          const double *ha = H(in.a), *hb = H(in.b);
          double* hr = H(k);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
              double hw = b * (ha[i * n + j] / a - ga[i] * ga[j] / (a * a)) +
                          (gb[i] * ga[j] + ga[i] * gb[j]) / a + la * hb[i * n + j];
              hr[i * n + j] = r * (hw + gw[i] * gw[j]);
            }
        }
        break;
      }
      case Op::Sin: {
        double a = v[in.a], s = std::sin(a), c = std::cos(a);
        v[k] = s;
        unary(k, in.a, c, -s);
        break;
      }
      case Op::Cos: {
        double a = v[in.a], s = std::sin(a), c = std::cos(a);
        v[k] = c;
        unary(k, in.a, -s, -c);
        break;
      }
      case Op::Exp: {
        double e = std::exp(v[in.a]);
        v[k] = e;
        unary(k, in.a, e, e);
        break;
      }
      case Op::Log: {
        double a = v[in.a];
        if (a <= 0) domain_error(k, "log of a non-positive value");
        v[k] = std::log(a);
        unary(k, in.a, 1.0 / a, -1.0 / (a * a));
        break;
      }
      case Op::Sqrt: {
        double a = v[in.a];
        if (a < 0) domain_error(k, "sqrt of a negative value");
        double s = std::sqrt(a);
        v[k] = s;
        if (a == 0) domain_error(k, "sqrt not differentiable at zero");
        unary(k, in.a, 0.5 / s, -0.25 / (s * a));
        break;
      }
      case Op::Abs: {
        double a = v[in.a];
        v[k] = std::fabs(a);
        unary(k, in.a, a >= 0 ? 1.0 : -1.0, 0.0);
        break;
      }
    }
  }

  out.n = n;
  out.value = v[m - 1];
  out.gradient.assign(G(m - 1), G(m - 1) + n);
  if (second) {
    out.hessian.resize(n * n);
    const double* hr = H(m - 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        out.hessian[i * n + j] = hr[i * n + j];
        out.hessian[j * n + i] = hr[i * n + j];
      }
  } else {
    out.hessian.clear();
  }
}

DualValue differentiate(const Expr& e, std::span<const double> point,
                        std::span<const std::size_t> wrt, int order) {
  CompiledExpr c(e);
  EvalWorkspace ws;
  DualValue out;
  c.derive(point, wrt, order, ws, out);
  return out;
}

std::vector<double> gradient(const Expr& e, std::span<const double> point,
                             std::span<const std::size_t> wrt) {
  return differentiate(e, point, wrt, 1).gradient;
}

}  // namespace kcontact
