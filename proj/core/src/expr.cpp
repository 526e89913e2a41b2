#include "kcontact/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace kcontact {

namespace {

constexpr std::pair<Function, std::string_view> kFunctions[] = {
    {Function::Sin, "sin"},   {Function::Cos, "cos"},   {Function::Exp, "exp"},
    {Function::Log, "log"},   {Function::Sqrt, "sqrt"}, {Function::Abs, "abs"},
};

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

}  // namespace

std::string_view function_name(Function f) {
  for (const auto& [fn, name] : kFunctions)
    if (fn == f) return name;
  return "?";
}

std::optional<Function> function_from_name(std::string_view name) {
  for (const auto& [fn, n] : kFunctions)
    if (n == name) return fn;
  return std::nullopt;
}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                         std::to_string(column)),
      line_(line),
      column_(column) {}

UnknownIdentifier::UnknownIdentifier(const std::string& name, std::size_t line, std::size_t column)
    : ParseError("unknown identifier '" + name + "'", line, column), name_(name) {}

DomainError::DomainError(const std::string& what, std::string subexpression)
    : std::runtime_error(what + " in '" + subexpression + "'"),
      subexpression_(std::move(subexpression)) {}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(), [&](char c) {
    return alpha(c) || std::isdigit(static_cast<unsigned char>(c));
  });
}

Vocabulary::Vocabulary(std::vector<std::string> names) {
  for (auto& n : names) add(std::move(n));
}

std::size_t Vocabulary::add(std::string name) {
  if (!is_identifier(name)) throw std::invalid_argument("not an identifier: '" + name + "'");
  if (function_from_name(name))
    throw std::invalid_argument("'" + name + "' is a reserved function name");
  if (lookup_.count(name)) throw std::invalid_argument("duplicate name '" + name + "'");
  lookup_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  return names_.size() - 1;
}

std::optional<std::size_t> Vocabulary::find(std::string_view name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("no symbol named '" + std::string(name) + "'");
  return *i;
}

// ---------------------------------------------------------------------------
// Expr

Expr::Expr() = default;  // null node reads as the constant 0

Expr::Expr(double c) : node_(nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = c;
  node_ = std::move(n);
}

Expr Expr::constant(double c) { return Expr(c); }

Expr Expr::variable(std::size_t index, std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->index = index;
  n->name = std::move(name);
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::call(Function f, Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Call;
  n->fn = f;
  n->a = std::move(arg);
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::make_binary(NodeKind k, const Expr& a, const Expr& b) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->a = a;
  n->b = b;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

NodeKind Expr::kind() const { return node_ ? node_->kind : NodeKind::Constant; }
double Expr::constant_value() const { return node_ ? node_->value : 0.0; }
std::size_t Expr::variable_index() const { return node_->index; }
const std::string& Expr::variable_name() const { return node_->name; }
Function Expr::function() const { return node_->fn; }
const Expr& Expr::lhs() const { return node_->a; }
const Expr& Expr::rhs() const { return node_->b; }

// Builders fold constants and the usual 0/1 identities; the parser bypasses
// them so that parsed text keeps its structure.
Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr(0.0 - a.constant_value());
  if (a.kind() == NodeKind::Negate) return a.lhs();
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Negate;
  n->a = a;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() + b.constant_value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.kind() == NodeKind::Negate) return Expr::make_binary(NodeKind::Sub, a, b.lhs());
  return Expr::make_binary(NodeKind::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() - b.constant_value());
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  return Expr::make_binary(NodeKind::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.constant_value() * b.constant_value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  // Constant factors go first and merge.
  if (b.is_constant()) return b * a;
  if (a.is_constant()) {
    if (b.kind() == NodeKind::Negate) return Expr(-a.constant_value()) * b.lhs();
    if (b.kind() == NodeKind::Mul && b.lhs().is_constant()) return Expr(a.constant_value() * b.lhs().constant_value()) * b.rhs();
  }
  return Expr::make_binary(NodeKind::Mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return Expr(a.constant_value() / b.constant_value());
  if (a.is_constant(0.0) && !(b.is_constant(0.0))) return Expr(0.0);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant() && b.constant_value() != 0.0) {
    if (a.kind() == NodeKind::Negate) return -(a.lhs() / b);
    if (a.kind() == NodeKind::Mul && a.lhs().is_constant()) return Expr(a.lhs().constant_value() / b.constant_value()) * a.rhs();
    if (a.kind() == NodeKind::Div) return (a.lhs() / b) / a.rhs();
  }
  return Expr::make_binary(NodeKind::Div, a, b);
}

Expr pow(const Expr& a, const Expr& b) {
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(0.0)) return Expr(1.0);
  if (a.is_constant() && b.is_constant()) {
    double v = std::pow(a.constant_value(), b.constant_value());
    if (std::isfinite(v)) return Expr(v);
  }
  return Expr::make_binary(NodeKind::Pow, a, b);
}

namespace {
Expr fold_call(Function f, const Expr& a) {
  if (a.is_constant()) {
    double x = a.constant_value();
    double v = 0.0;
    switch (f) {
      case Function::Sin: v = std::sin(x); break;
      case Function::Cos: v = std::cos(x); break;
      case Function::Exp: v = std::exp(x); break;
      case Function::Log: v = x > 0 ? std::log(x) : NAN; break;
      case Function::Sqrt: v = x >= 0 ? std::sqrt(x) : NAN; break;
      case Function::Abs: v = std::fabs(x); break;
    }
    if (std::isfinite(v)) return Expr(v);
  }
  return Expr::call(f, a);
}
}  // namespace

Expr sin(const Expr& a) { return fold_call(Function::Sin, a); }
Expr cos(const Expr& a) { return fold_call(Function::Cos, a); }
Expr exp(const Expr& a) { return fold_call(Function::Exp, a); }
Expr log(const Expr& a) { return fold_call(Function::Log, a); }
Expr sqrt(const Expr& a) { return fold_call(Function::Sqrt, a); }
Expr abs(const Expr& a) { return fold_call(Function::Abs, a); }

bool operator==(const Expr& a, const Expr& b) {
  if (a.id() == b.id()) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case NodeKind::Constant: return a.constant_value() == b.constant_value();
    case NodeKind::Variable:
      return a.variable_index() == b.variable_index() && a.variable_name() == b.variable_name();
    case NodeKind::Negate: return a.lhs() == b.lhs();
    case NodeKind::Call: return a.function() == b.function() && a.lhs() == b.lhs();
    default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Negate: return 3;
    case NodeKind::Pow: return 4;
    case NodeKind::Constant: return e.constant_value() < 0 || std::signbit(e.constant_value()) ? 3 : 5;
    default: return 5;
  }
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool wrap, std::string& out) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

void print(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case NodeKind::Constant: out += format_number(e.constant_value()); return;
    case NodeKind::Variable: out += e.variable_name(); return;
    case NodeKind::Negate:
      out += '-';
      print_wrapped(e.lhs(), precedence(e.lhs()) < 3, out);
      return;
    case NodeKind::Call:
      out += function_name(e.function());
      out += '(';
      print(e.lhs(), out);
      out += ')';
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
      print_wrapped(e.lhs(), precedence(e.lhs()) < 1, out);
      out += e.kind() == NodeKind::Add ? " + " : " - ";
      print_wrapped(e.rhs(), precedence(e.rhs()) <= 1 || precedence(e.rhs()) == 3, out);
      return;
    case NodeKind::Mul:
    case NodeKind::Div:
      print_wrapped(e.lhs(), precedence(e.lhs()) < 2, out);
      out += e.kind() == NodeKind::Mul ? "*" : "/";
      print_wrapped(e.rhs(), precedence(e.rhs()) <= 3, out);
      return;
    case NodeKind::Pow:
      print_wrapped(e.lhs(), precedence(e.lhs()) <= 4, out);
      out += '^';
      print_wrapped(e.rhs(), precedence(e.rhs()) < 4, out);
      return;
  }
}

}  // namespace

std::string Expr::to_string() const {
  std::string out;
  print(*this, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

// Raw node construction for the parser, without the folding of the builders.
struct ExprAccess {
  static Expr binary(NodeKind k, const Expr& a, const Expr& b) {
    if (k == NodeKind::Negate) {
      auto n = std::make_shared<Node>();
      n->kind = NodeKind::Negate;
      n->a = a;
      return Expr(std::shared_ptr<const Node>(std::move(n)));
    }
    return Expr::make_binary(k, a, b);
  }
};

namespace {

class Parser {
 public:
  Parser(std::string_view text, const Vocabulary& vocab,
         const std::map<std::string, Expr, std::less<>>* macros)
      : text_(text), vocab_(vocab), macros_(macros) {}

  Expr run() {
    skip_space();
    if (at_end()) fail("empty expression");
    Expr e = parse_expr();
    skip_space();
    if (!at_end()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::pair<std::size_t, std::size_t> location(std::size_t at) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return {line, col};
  }

  [[noreturn]] void fail(const std::string& msg) { fail_at(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) {
    auto [l, c] = location(at);
    throw ParseError(msg, l, c);
  }

  bool accept(char c) {
    skip_space();
    if (!at_end() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static Expr binary(NodeKind k, const Expr& a, const Expr& b) { return ExprAccess::binary(k, a, b); }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = binary(NodeKind::Add, lhs, parse_term());
      else if (accept('-'))
        lhs = binary(NodeKind::Sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    for (;;) {
      if (accept('*'))
        lhs = binary(NodeKind::Mul, lhs, parse_factor());
      else if (accept('/'))
        lhs = binary(NodeKind::Div, lhs, parse_factor());
      else
        return lhs;
    }
  }

  Expr parse_factor() {
    if (accept('-')) {
      Expr inner = parse_factor();
      if (inner.is_constant()) return Expr(-inner.constant_value());
      return binary(NodeKind::Negate, inner, Expr());
    }
    Expr base = parse_atom();
    if (accept('^')) return binary(NodeKind::Pow, base, parse_factor());
    return base;
  }

  Expr parse_atom() {
    skip_space();
    if (at_end()) fail("unexpected end of input");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      std::string_view ident = text_.substr(start, pos_ - start);
      if (auto f = function_from_name(ident)) {
        if (!accept('(')) fail("expected '(' after function name");
        Expr arg = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return Expr::call(*f, arg);
      }
      if (auto i = vocab_.find(ident)) return Expr::variable(*i, std::string(ident));
      if (macros_) {
        auto it = macros_->find(ident);
        if (it != macros_->end()) return it->second;
      }
      auto [l, col] = location(start);
      throw UnknownIdentifier(std::string(ident), l, col);
    }
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (!at_end() && text_[pos_] == '.') {
      ++pos_;
      while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (!at_end() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (!at_end() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (at_end() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        pos_ = save;
      } else {
        while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    std::string_view lit = text_.substr(start, pos_ - start);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
    if (ec != std::errc{} || ptr != lit.data() + lit.size() || lit == ".")
      fail_at("malformed number '" + std::string(lit) + "'", start);
    return Expr(v);
  }

  std::string_view text_;
  const Vocabulary& vocab_;
  const std::map<std::string, Expr, std::less<>>* macros_;
  std::size_t pos_ = 0;
};

}  // namespace


Expr parse(std::string_view text, const Vocabulary& vocab) {
  return Parser(text, vocab, nullptr).run();
}

Expr parse_with_macros(std::string_view text, const Vocabulary& vocab,
                       const std::vector<std::pair<std::string, std::string>>& macros) {
  std::map<std::string, Expr, std::less<>> defined;
  for (const auto& [name, body] : macros) {
    if (!is_identifier(name)) throw std::invalid_argument("bad macro name '" + name + "'");
    if (vocab.contains(name))
      throw std::invalid_argument("macro '" + name + "' shadows a symbol");
    defined[name] = Parser(body, vocab, &defined).run();
  }
  return Parser(text, vocab, &defined).run();
}

// ---------------------------------------------------------------------------

namespace {
void collect(const Expr& e, std::set<std::size_t>& out) {
  switch (e.kind()) {
    case NodeKind::Constant: return;
    case NodeKind::Variable: out.insert(e.variable_index()); return;
    case NodeKind::Negate:
    case NodeKind::Call: collect(e.lhs(), out); return;
    default:
      collect(e.lhs(), out);
      collect(e.rhs(), out);
  }
}
}  // namespace

std::vector<std::size_t> variables_of(const Expr& e) {
  std::set<std::size_t> s;
  collect(e, s);
  return {s.begin(), s.end()};
}

bool depends_on(const Expr& e, std::size_t index) {
  switch (e.kind()) {
    case NodeKind::Constant: return false;
    case NodeKind::Variable: return e.variable_index() == index;
    case NodeKind::Negate:
    case NodeKind::Call: return depends_on(e.lhs(), index);
    default: return depends_on(e.lhs(), index) || depends_on(e.rhs(), index);
  }
}

namespace {
Expr rebuild(const Expr& e, const std::function<std::optional<Expr>(const Expr&)>& leaf) {
  switch (e.kind()) {
    case NodeKind::Constant: return e;
    case NodeKind::Variable: {
      auto r = leaf(e);
      return r ? *r : e;
    }
    case NodeKind::Negate: return -rebuild(e.lhs(), leaf);
    case NodeKind::Call: return Expr::call(e.function(), rebuild(e.lhs(), leaf));
    case NodeKind::Add: return rebuild(e.lhs(), leaf) + rebuild(e.rhs(), leaf);
    case NodeKind::Sub: return rebuild(e.lhs(), leaf) - rebuild(e.rhs(), leaf);
    case NodeKind::Mul: return rebuild(e.lhs(), leaf) * rebuild(e.rhs(), leaf);
    case NodeKind::Div: return rebuild(e.lhs(), leaf) / rebuild(e.rhs(), leaf);
    case NodeKind::Pow: return pow(rebuild(e.lhs(), leaf), rebuild(e.rhs(), leaf));
  }
  return e;
}
}  // namespace

Expr derivative(const Expr& e, std::size_t index) {
  switch (e.kind()) {
    case NodeKind::Constant: return Expr(0.0);
    case NodeKind::Variable: return Expr(e.variable_index() == index ? 1.0 : 0.0);
    case NodeKind::Negate: return -derivative(e.lhs(), index);
    case NodeKind::Add: return derivative(e.lhs(), index) + derivative(e.rhs(), index);
    case NodeKind::Sub: return derivative(e.lhs(), index) - derivative(e.rhs(), index);
    case NodeKind::Mul: {
      const Expr &a = e.lhs(), &b = e.rhs();
      return derivative(a, index) * b + a * derivative(b, index);
    }
    case NodeKind::Div: {
      const Expr &a = e.lhs(), &b = e.rhs();
      Expr db = derivative(b, index);
      if (db.is_constant(0.0)) return derivative(a, index) / b;
      return (derivative(a, index) * b - a * db) / pow(b, Expr(2.0));
    }
    case NodeKind::Pow: {
      const Expr &a = e.lhs(), &b = e.rhs();
      Expr da = derivative(a, index), db = derivative(b, index);
      Expr out = db.is_constant(0.0) ? Expr(0.0) : e * db * log(a);
      if (!da.is_constant(0.0)) out = out + b * pow(a, b - Expr(1.0)) * da;
      return out;
    }
    case NodeKind::Call: {
      const Expr& a = e.lhs();
      Expr da = derivative(a, index);
      if (da.is_constant(0.0)) return Expr(0.0);
      switch (e.function()) {
        case Function::Sin: return cos(a) * da;
        case Function::Cos: return -(sin(a) * da);
        case Function::Exp: return e * da;
        case Function::Log: return da / a;
        case Function::Sqrt: return da / (Expr(2.0) * e);
        case Function::Abs: return a / e * da;
      }
    }
  }
  return Expr(0.0);
}

Expr substitute(const Expr& e, const std::map<std::size_t, Expr>& replacement) {
  return rebuild(e, [&](const Expr& v) -> std::optional<Expr> {
    auto it = replacement.find(v.variable_index());
    if (it == replacement.end()) return std::nullopt;
    return it->second;
  });
}

Expr rebind(const Expr& e, const Vocabulary& target) {
  return rebuild(e, [&](const Expr& v) -> std::optional<Expr> {
    auto i = target.find(v.variable_name());
    if (!i) throw BindingError("symbol '" + v.variable_name() + "' is not in the target vocabulary");
    return Expr::variable(*i, v.variable_name());
  });
}

double eval(const Expr& e, std::span<const double> point) {
  switch (e.kind()) {
    case NodeKind::Constant: return e.constant_value();
    case NodeKind::Variable:
      if (e.variable_index() >= point.size())
        throw BindingError("no value bound for '" + e.variable_name() + "'");
      return point[e.variable_index()];
    case NodeKind::Negate: return -eval(e.lhs(), point);
    case NodeKind::Add: return eval(e.lhs(), point) + eval(e.rhs(), point);
    case NodeKind::Sub: return eval(e.lhs(), point) - eval(e.rhs(), point);
    case NodeKind::Mul: return eval(e.lhs(), point) * eval(e.rhs(), point);
    case NodeKind::Div: {
      double d = eval(e.rhs(), point);
      if (d == 0.0) throw DomainError("division by zero", e.to_string());
      return eval(e.lhs(), point) / d;
    }
    case NodeKind::Pow: {
      double a = eval(e.lhs(), point);
      double b = eval(e.rhs(), point);
      if (a < 0 && b != std::round(b))
        throw DomainError("non-integer power of a negative base", e.to_string());
      if (a == 0 && b < 0) throw DomainError("negative power of zero", e.to_string());
      return std::pow(a, b);
    }
    case NodeKind::Call: {
      double a = eval(e.lhs(), point);
      switch (e.function()) {
        case Function::Sin: return std::sin(a);
        case Function::Cos: return std::cos(a);
        case Function::Exp: return std::exp(a);
        case Function::Log:
          if (a <= 0) throw DomainError("log of a non-positive value", e.to_string());
          return std::log(a);
        case Function::Sqrt:
          if (a < 0) throw DomainError("sqrt of a negative value", e.to_string());
          return std::sqrt(a);
        case Function::Abs: return std::fabs(a);
      }
    }
  }
  return 0.0;
}

double eval(const Expr& e, const Vocabulary& vocab, const std::map<std::string, double>& bindings) {
  std::vector<double> point(vocab.size(), 0.0);
  for (std::size_t idx : variables_of(e)) {
    auto it = bindings.find(vocab.name(idx));
    if (it == bindings.end()) throw BindingError("no value bound for '" + vocab.name(idx) + "'");
    point[idx] = it->second;
  }
  return eval(e, point);
}

}  // namespace kcontact
