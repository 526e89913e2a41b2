#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kcontact/hddw.hpp"

using namespace kcontact;

namespace {

HdDWSystem wave_system(double kappa) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"}, {{"kappa", kappa}});
  return HdDWSystem(s, s.parse("p_t^2/2 - p_x^2/2 + kappa*z_t"));
}

// Samples an exact section (u, p_t, p_x, z_t, z_x) of the system on a grid.
Trajectory sample_section(const std::function<std::array<double, 5>(double, double)>& f, std::size_t n,
                          std::size_t steps, double dt) {
  Trajectory tr;
  auto g = Grid::line(n, 0.0, 2 * M_PI);
  for (std::size_t s = 0; s < steps; ++s) {
    FieldState st(g, {"u", "p_t", "p_x", "z_t", "z_x"}, s * dt);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = f(s * dt, g.coordinate(0, i));
      for (std::size_t c = 0; c < 5; ++c) st.channel(c)[i] = v[c];
    }
    tr.snapshots.push_back(std::move(st));
  }
  return tr;
}

}  // namespace

TEST(HdDW, EquationNames) {
  auto sys = wave_system(0.0);
  EXPECT_EQ(sys.equation_names(),
            (std::vector<std::string>{"field:u:t", "field:u:x", "balance:u", "dissipative"}));
  auto a = PhaseSpace::make_adapted({"u", "v"}, {"p_x", "q_x"}, {"-v/2", "u/2"});
  HdDWSystem as(a, a.parse("-p_x*q_x + v*u"));
  EXPECT_EQ(as.equation_names(), (std::vector<std::string>{"constitutive:u", "constitutive:v", "balance:u",
                                                           "balance:v", "dissipative"}));
}

TEST(HdDW, CanonicalRhsByHand) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"}, {{"lambda", 0.3}});
  HdDWSystem sys(s, s.parse("(p_t^2 - p_x^2)/2 + u^2/2 + lambda*z_t^2"));
  auto pt = s.make_point();
  pt[0] = 0.5;
  pt[1] = 2.0;
  pt[2] = -1.0;
  pt[3] = 0.4;
  PointWorkspace ws;
  HdDWSystem::CanonicalRHS r;
  sys.canonical_rhs(pt, r, ws);
  EXPECT_DOUBLE_EQ(r.field[0], 2.0);
  EXPECT_DOUBLE_EQ(r.field[1], 1.0);
  // -(dh/du + p_t dh/dz_t) = -(0.5 + 2 * 2 * 0.3 * 0.4)
  EXPECT_NEAR(r.balance[0], -(0.5 + 2.0 * 0.24), 1e-15);
  // p.dh/dp - h
  double h = (4.0 - 1.0) / 2 + 0.125 + 0.3 * 0.16;
  EXPECT_NEAR(r.dissipative, (4.0 - 1.0) - h, 1e-15);
}

TEST(HdDW, AdaptedRhsByHand) {
  auto a = PhaseSpace::make_adapted({"u", "v"}, {"p_x", "q_x"}, {"-v/2", "u/2"}, {{"b", 0.7}});
  HdDWSystem sys(a, a.parse("-p_x*q_x + v*u^2 + b*z_t + z_x"));
  auto pt = a.make_point();
  pt[0] = 1.5;   // u
  pt[1] = 0.5;   // v
  pt[2] = 0.2;   // p_x
  pt[3] = -0.3;  // q_x
  PointWorkspace ws;
  HdDWSystem::AdaptedRHS r;
  sys.adapted_rhs(pt, r, ws);
  EXPECT_DOUBLE_EQ(r.constitutive[0], 0.3);
  EXPECT_DOUBLE_EQ(r.constitutive[1], -0.2);
  EXPECT_DOUBLE_EQ(r.theta[0], -0.25);
  EXPECT_DOUBLE_EQ(r.theta[1], 0.75);
  // dh/dy + b theta + 1 * pi
  EXPECT_NEAR(r.balance[0], 2 * 1.5 * 0.5 + 0.7 * (-0.25) + 0.2, 1e-15);
  EXPECT_NEAR(r.balance[1], 1.5 * 1.5 + 0.7 * 0.75 + (-0.3), 1e-15);
}

// Free wave u = sin x cos t with zero contact variables: residuals are pure
// truncation error, second order in the grid spacing.
TEST(HdDW, ResidualOfExactSectionConverges) {
  auto sys = wave_system(0.0);
  auto exact = [](double t, double x) -> std::array<double, 5> {
    return {std::sin(x) * std::cos(t), -std::sin(x) * std::sin(t), -std::cos(x) * std::cos(t), 0.0, 0.0};
  };
  auto coarse = residual_on_state(sys, sample_section(exact, 32, 12, 0.05));
  auto fine = residual_on_state(sys, sample_section(exact, 64, 23, 0.025));
  for (const char* eq : {"field:u:t", "field:u:x", "balance:u"}) {
    double ratio = coarse.at(eq).max_abs / fine.at(eq).max_abs;
    EXPECT_GT(ratio, 3.5) << eq;
    EXPECT_LT(ratio, 4.5) << eq;
  }
  // The dissipative law is linear in z and the section has z = 0, but
  // p.dh/dp - h = (p_t^2 - p_x^2)/2 is not zero: it fails as it should.
  EXPECT_GT(fine.at("dissipative").max_abs, 0.1);
  EXPECT_EQ(coarse.samples, 10u * 32u);  // periodic: every node, interior snapshots
}

TEST(HdDW, ReportCsv) {
  auto sys = wave_system(0.0);
  auto exact = [](double t, double x) -> std::array<double, 5> {
    return {std::sin(x - t), std::cos(x - t) * -1.0 * -1.0, -std::cos(x - t), 0.0, 0.0};
  };
  auto r = residual_on_state(sys, sample_section(exact, 16, 4, 0.1));
  std::ostringstream os;
  r.write_summary_csv(os);
  EXPECT_NE(os.str().find("balance:u"), std::string::npos);
  EXPECT_THROW(r.at("nope"), std::out_of_range);
}
