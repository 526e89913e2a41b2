#include <gtest/gtest.h>

#include <cmath>

#include "kcontact/expr.hpp"

using namespace kcontact;

namespace {

double ev(const std::string& text, std::map<std::string, double> vars = {}) {
  Vocabulary v;
  for (const auto& [k, _] : vars) v.add(k);
  return eval(parse(text, v), v, vars);
}

}  // namespace

TEST(Expr, Precedence) {
  EXPECT_DOUBLE_EQ(ev("1 + 2*3"), 7.0);
  EXPECT_DOUBLE_EQ(ev("(1 + 2)*3"), 9.0);
  EXPECT_DOUBLE_EQ(ev("2^3^2"), 512.0);     // right associative
  EXPECT_DOUBLE_EQ(ev("-2^2"), -4.0);       // ^ binds tighter than unary minus
  EXPECT_DOUBLE_EQ(ev("8/4/2"), 1.0);       // left associative
  EXPECT_DOUBLE_EQ(ev("2*-3"), -6.0);
  EXPECT_DOUBLE_EQ(ev("1e-3*1e3"), 1.0);
}

TEST(Expr, FunctionsAndVariables) {
  EXPECT_NEAR(ev("sin(x)^2 + cos(x)^2", {{"x", 0.7}}), 1.0, 1e-15);
  EXPECT_NEAR(ev("exp(log(y))", {{"y", 3.5}}), 3.5, 1e-14);
  EXPECT_DOUBLE_EQ(ev("sqrt(abs(z))", {{"z", -16.0}}), 4.0);
}

TEST(Expr, ErrorsCarryPosition) {
  Vocabulary v({"u"});
  try {
    parse("u + w", v);
    FAIL() << "expected UnknownIdentifier";
  } catch (const UnknownIdentifier& e) {
    EXPECT_EQ(e.name(), "w");
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.column(), 5u);
  }
  EXPECT_THROW(parse("u +", v), ParseError);
  EXPECT_THROW(parse("(u", v), ParseError);
  EXPECT_THROW(parse("", v), ParseError);
  EXPECT_THROW(parse("sin u", v), ParseError);
}

TEST(Expr, DomainErrorNamesSubexpression) {
  Vocabulary v({"u"});
  Expr e = parse("1 + log(u)", v);
  double pt[1] = {-1.0};
  try {
    eval(e, pt);
    FAIL() << "expected DomainError";
  } catch (const DomainError& err) {
    EXPECT_NE(err.subexpression().find("log"), std::string::npos);
  }
}

TEST(Expr, MacrosInline) {
  Vocabulary v({"u"});
  Expr e = parse_with_macros("V + 2*W", v, {{"V", "u^2"}, {"W", "V + 1"}});
  double pt[1] = {3.0};
  EXPECT_DOUBLE_EQ(eval(e, pt), 9.0 + 2.0 * 10.0);
}

TEST(Expr, BindingErrorOnMissingSymbol) {
  Vocabulary v({"a", "b"});
  Expr e = parse("a + b", v);
  EXPECT_THROW(eval(e, v, {{"a", 1.0}}), BindingError);
}

TEST(Expr, PrintRoundTrip) {
  Vocabulary v({"u", "p"});
  for (const char* text : {"-(u - p)^2/(2*u)", "u - (p - u)", "2^(u^p)", "-u^2", "sin(u)*exp(-p)"}) {
    Expr e = parse(text, v);
    Expr back = parse(e.to_string(), v);
    double pt[2] = {0.7, 1.3};
    EXPECT_NEAR(eval(e, pt), eval(back, pt), 1e-14) << text << " -> " << e.to_string();
  }
}

TEST(Expr, SymbolicDerivativeMatchesDifferences) {
  Vocabulary v({"u", "p"});
  Expr e = parse("p^2/(2*u) + sin(u*p) - exp(-u)*sqrt(p) + u^3*log(p)", v);
  double pt[2] = {0.8, 1.7};
  for (std::size_t i = 0; i < 2; ++i) {
    Expr d = derivative(e, i);
    double h = 1e-6, a[2] = {pt[0], pt[1]}, b[2] = {pt[0], pt[1]};
    a[i] += h;
    b[i] -= h;
    EXPECT_NEAR(eval(d, pt), (eval(e, a) - eval(e, b)) / (2 * h), 1e-7);
  }
}

TEST(Expr, DerivativeFoldsConstants) {
  Vocabulary v({"p", "c"});
  Expr e = parse("(p^2 - 1)/2", v);
  EXPECT_EQ(derivative(e, 0).to_string(), "p");
  EXPECT_TRUE(derivative(e, 1).is_constant(0.0));
}

TEST(Expr, SubstituteAndRebind) {
  Vocabulary v({"u", "w"});
  Expr e = parse("u*w + u", v);
  Expr s = substitute(e, {{1, parse("u + 1", v)}});
  double pt[2] = {2.0, 100.0};
  EXPECT_DOUBLE_EQ(eval(s, pt), 2.0 * 3.0 + 2.0);
  Vocabulary other({"w", "u"});
  Expr r = rebind(e, other);
  double q[2] = {5.0, 2.0};
  EXPECT_DOUBLE_EQ(eval(r, q), 12.0);
  EXPECT_EQ(variables_of(e), (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(depends_on(e, 1));
}

TEST(Vocabulary, RejectsDuplicatesAndBadNames) {
  Vocabulary v;
  v.add("u");
  EXPECT_THROW(v.add("u"), std::invalid_argument);
  EXPECT_THROW(v.add("2u"), std::invalid_argument);
  EXPECT_EQ(v.index_of("u"), 0u);
  EXPECT_FALSE(v.contains("x"));
}
