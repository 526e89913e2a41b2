#include <gtest/gtest.h>

#include <cmath>

#include "kcontact/phase_space.hpp"
#include "kcontact/stencil.hpp"

using namespace kcontact;

TEST(PhaseSpace, CanonicalNamesAndLayout) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"}, {{"c", 2.0}});
  EXPECT_EQ(s.coordinate_names(), (std::vector<std::string>{"u", "p_t", "p_x", "z_t", "z_x"}));
  EXPECT_EQ(s.coordinate_count(), 5u);
  EXPECT_EQ(s.momentum(0, 1), s.vocabulary().index_of("p_x"));
  EXPECT_EQ(s.z(0), s.vocabulary().index_of("z_t"));
  auto pt = s.make_point();
  ASSERT_EQ(pt.size(), 6u);
  EXPECT_DOUBLE_EQ(pt[s.parameter_index("c")], 2.0);
}

TEST(PhaseSpace, SeveralFieldsUseFieldPrefixedMomenta) {
  auto s = PhaseSpace::make_canonical({"a", "b"}, {"t", "x"});
  EXPECT_TRUE(s.vocabulary().contains("p_a_t"));
  EXPECT_TRUE(s.vocabulary().contains("p_b_x"));
  EXPECT_EQ(s.momentum_block().size(), 4u);
}

TEST(PhaseSpace, RejectsBadInput) {
  EXPECT_THROW(PhaseSpace::make_canonical({}, {"t"}), std::invalid_argument);
  EXPECT_THROW(PhaseSpace::make_canonical({"u"}, {"t", "t"}), std::invalid_argument);
  EXPECT_THROW(PhaseSpace::make_canonical({"u"}, {"t"}, {{"k", NAN}}), std::invalid_argument);
  EXPECT_THROW(PhaseSpace::make_adapted({"u", "v"}, {"p"}, {"-v/2", "u/2"}), std::invalid_argument);
  EXPECT_THROW(PhaseSpace::make_adapted({"u", "v"}, {"p", "q"}, {"-p/2", "u/2"}), std::invalid_argument);
}

TEST(PhaseSpace, ParameterOverrides) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"}, {{"c", 2.0}});
  auto t = s.with_parameters({{"c", 3.0}});
  EXPECT_DOUBLE_EQ(t.parameter("c"), 3.0);
  EXPECT_DOUBLE_EQ(s.parameter("c"), 2.0);
  EXPECT_THROW(s.with_parameters({{"nope", 1.0}}), std::invalid_argument);
}

TEST(PhaseSpace, AdaptedOmegaIsAntisymmetric) {
  auto s = PhaseSpace::make_adapted({"u", "v"}, {"p_x", "q_x"}, {"-v/2", "u/2"});
  EXPECT_EQ(s.coordinate_names(), (std::vector<std::string>{"u", "v", "p_x", "q_x", "z_t", "z_x"}));
  EXPECT_THROW(s.momentum(0, 0), std::out_of_range);
  auto pt = s.make_point();
  auto om = s.omega(pt);
  // theta = (-v/2, u/2): Omega_01 = d_v theta_u - d_u theta_v = -1
  EXPECT_DOUBLE_EQ(om(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(om(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(om(0, 0), 0.0);
}

TEST(Grid, SpacingAndBoundaries) {
  auto p = Grid::line(8, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(p.spacing(0), 0.125);
  auto d = Grid::line(9, 0.0, 1.0, Boundary::Dirichlet);
  EXPECT_DOUBLE_EQ(d.spacing(0), 0.125);
  EXPECT_TRUE(d.on_boundary(0));
  EXPECT_TRUE(d.on_boundary(8));
  EXPECT_FALSE(d.on_boundary(4));
  auto b = Grid::box({3, 4}, {0, 0}, {1, 1});
  EXPECT_EQ(b.size(), 12u);
  EXPECT_EQ(b.axis_index(7, 0), 1u);
  EXPECT_EQ(b.axis_index(7, 1), 3u);
  EXPECT_EQ(boundary_from_name("neumann"), Boundary::Neumann);
  EXPECT_THROW(boundary_from_name("robin"), std::invalid_argument);
}

TEST(FieldState, Channels) {
  FieldState s(Grid::line(4, 0, 1), {"u", "p_t"}, 0.5);
  s.channel("p_t")[2] = 3.0;
  EXPECT_EQ(s.channel(1)[2], 3.0);
  EXPECT_TRUE(s.has_channel("u"));
  EXPECT_FALSE(s.has_channel("v"));
  EXPECT_TRUE(s.all_finite());
  s.channel(0)[0] = NAN;
  EXPECT_FALSE(s.all_finite());
}

TEST(Stencil, SecondOrderOnPeriodicSine) {
  for (std::size_t n : {32u, 64u}) {
    auto g = Grid::line(n, 0.0, 2 * M_PI);
    std::vector<double> f(n), d(n), dd(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = std::sin(g.coordinate(0, i));
    d1(g, f, 0, Parity::Even, d);
    d2(g, f, 0, Parity::Even, dd);
    double h = g.spacing(0), e1 = 0, e2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = g.coordinate(0, i);
      e1 = std::max(e1, std::fabs(d[i] - std::cos(x)));
      e2 = std::max(e2, std::fabs(dd[i] + std::sin(x)));
    }
    EXPECT_NEAR(e1, h * h / 6, h * h * 0.01);
    EXPECT_NEAR(e2, h * h / 12, h * h * 0.01);
  }
}

TEST(Stencil, ReflectionParity) {
  auto g = Grid::line(5, 0.0, 1.0, Boundary::Dirichlet);
  std::vector<double> f{0, 1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(neighbor(g, f, 0, 0, -1, Parity::Odd), -1.0);
  EXPECT_DOUBLE_EQ(neighbor(g, f, 0, 0, -1, Parity::Even), 1.0);
  EXPECT_EQ(natural_parity(Boundary::Dirichlet), Parity::Odd);
  EXPECT_EQ(flip(Parity::Odd), Parity::Even);
}
