#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "kcontact/ad.hpp"
#include "kcontact/catalog.hpp"

using namespace kcontact;

TEST(AD, MatchesHandDerivatives) {
  Vocabulary v({"x", "y"});
  Expr e = parse("x^2*y + sin(x*y)", v);
  double pt[2] = {0.3, -1.2};
  std::size_t wrt[2] = {0, 1};
  DualValue d = differentiate(e, pt, wrt, 2);
  double x = pt[0], y = pt[1];
  EXPECT_NEAR(d.value, x * x * y + std::sin(x * y), 1e-15);
  EXPECT_NEAR(d.d(0), 2 * x * y + y * std::cos(x * y), 1e-15);
  EXPECT_NEAR(d.d(1), x * x + x * std::cos(x * y), 1e-15);
  EXPECT_NEAR(d.dd(0, 0), 2 * y - y * y * std::sin(x * y), 1e-15);
  EXPECT_NEAR(d.dd(0, 1), 2 * x + std::cos(x * y) - x * y * std::sin(x * y), 1e-15);
  EXPECT_EQ(d.dd(0, 1), d.dd(1, 0));
}

TEST(AD, SubsetOfVariables) {
  Vocabulary v({"a", "b", "c"});
  Expr e = parse("a*b*c", v);
  double pt[3] = {2, 3, 5};
  std::size_t wrt[1] = {2};
  auto g = gradient(e, pt, wrt);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0], 6.0);
}

TEST(AD, PowerWithVariableExponent) {
  Vocabulary v({"u", "m"});
  Expr e = parse("u^(m - 1)", v);
  double pt[2] = {1.7, 2.5};
  std::size_t wrt[2] = {0, 1};
  DualValue d = differentiate(e, pt, wrt, 1);
  EXPECT_NEAR(d.d(0), 1.5 * std::pow(1.7, 0.5), 1e-14);
  EXPECT_NEAR(d.d(1), std::pow(1.7, 1.5) * std::log(1.7), 1e-14);
}

TEST(AD, DomainErrorsSurface) {
  Vocabulary v({"u"});
  CompiledExpr c(parse("sqrt(u) + log(u)", v));
  EvalWorkspace ws;
  double pt[1] = {-0.5};
  EXPECT_THROW(c.value(pt, ws), DomainError);
}

// Every catalog Hamiltonian: AD against central differences of plain values.
TEST(AD, CatalogHamiltoniansAgreeWithDifferences) {
  for (const auto& id : list_models()) {
    Model m(get_model(id));
    const auto& sys = m.system();
    const std::size_t nc = m.space().coordinate_count();
    std::vector<std::size_t> all(nc);
    std::iota(all.begin(), all.end(), 0);
    EvalWorkspace ws;
    DualValue d;
    for (auto pt : sample_points(m, 10, 11)) {
      sys.tape().derive(pt, all, 2, ws, d);
      for (std::size_t i = 0; i < nc; ++i) {
        const double h = 1e-6;
        auto a = pt, b = pt;
        a[i] += h;
        b[i] -= h;
        double fd = (sys.tape().value(a, ws) - sys.tape().value(b, ws)) / (2 * h);
        EXPECT_NEAR(d.d(i), fd, 1e-6 * std::max(1.0, std::fabs(fd))) << id << " coordinate " << i;
      }
    }
  }
}
