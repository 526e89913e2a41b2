#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kcontact {

enum class NodeKind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };

enum class Function { Sin, Cos, Exp, Log, Sqrt, Abs };

std::string_view function_name(Function f);
std::optional<Function> function_from_name(std::string_view name);

/// Thrown for malformed input text. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// An identifier that is neither a coordinate, a parameter nor a function.
class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t line, std::size_t column);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Evaluation left the domain of an operation (log of a non-positive value,
/// division by zero, ...). `subexpression()` is the printed offending node.
class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& what, std::string subexpression);
  const std::string& subexpression() const { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Raised when a name-keyed binding map misses a referenced symbol.
class BindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered list of symbol names. Expressions refer to symbols by position.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  /// Appends a name; throws std::invalid_argument on duplicates or bad identifiers.
  std::size_t add(std::string name);
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> lookup_;
};

bool is_identifier(std::string_view s);

struct Node;

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();  // the constant 0
  Expr(double c);  // NOLINT(google-explicit-constructor)

  static Expr constant(double c);
  static Expr variable(std::size_t index, std::string name);
  static Expr call(Function f, Expr arg);

  NodeKind kind() const;
  double constant_value() const;
  std::size_t variable_index() const;
  const std::string& variable_name() const;
  Function function() const;
  /// Operand of unary nodes and left operand of binary ones.
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool is_constant() const { return kind() == NodeKind::Constant; }
  bool is_constant(double c) const { return is_constant() && constant_value() == c; }

  std::string to_string() const;
  const Node* id() const { return node_.get(); }

  friend Expr operator-(const Expr& a);
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& a, const Expr& b);

  /// Structural equality.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  friend struct ExprAccess;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make_binary(NodeKind k, const Expr& a, const Expr& b);
  std::shared_ptr<const Node> node_;
};

Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr log(const Expr& a);
Expr sqrt(const Expr& a);
Expr abs(const Expr& a);

struct Node {
  NodeKind kind{NodeKind::Constant};
  double value{0.0};
  std::size_t index{0};
  std::string name;
  Function fn{Function::Sin};
  Expr a;
  Expr b;
};

/// Parses `text` against `vocab`.
///
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | atom ('^' factor)?
///   atom   := number | ident | func '(' expr ')' | '(' expr ')'
///
/// `^` is right associative and binds tighter than unary minus.
Expr parse(std::string_view text, const Vocabulary& vocab);

/// Parses with extra named macros. Macro bodies are themselves parsed against
/// `vocab` plus previously defined macros, and are inlined on use.
Expr parse_with_macros(std::string_view text, const Vocabulary& vocab,
                       const std::vector<std::pair<std::string, std::string>>& macros);

/// Sorted, de-duplicated variable indices referenced by `e`.
std::vector<std::size_t> variables_of(const Expr& e);
bool depends_on(const Expr& e, std::size_t index);

/// Symbolic partial derivative, built with the folding constructors. Used
/// for printing equations; numerics go through CompiledExpr.
Expr derivative(const Expr& e, std::size_t index);

/// Replaces variables by expressions.
Expr substitute(const Expr& e, const std::map<std::size_t, Expr>& replacement);

/// Renumbers variables by name into another vocabulary.
Expr rebind(const Expr& e, const Vocabulary& target);

/// Direct recursive evaluation. `point` is indexed by vocabulary position.
double eval(const Expr& e, std::span<const double> point);
double eval(const Expr& e, const Vocabulary& vocab, const std::map<std::string, double>& bindings);

}  // namespace kcontact
