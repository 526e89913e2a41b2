#include <gtest/gtest.h>

#include <cmath>

#include "kcontact/catalog.hpp"
#include "kcontact/dissipation.hpp"

using namespace kcontact;

namespace {

Model symmetric_model(const ModelEntry& e, const SymmetryDecl& d) { return Model(e, d.params, d.macros); }

}  // namespace

TEST(Symmetry, DeclaredSymmetriesHold) {
  for (const auto& e : catalog()) {
    for (const auto& d : e.symmetries) {
      Model m = symmetric_model(e, d);
      auto y = SymmetryField::parse(m.space(), d.components, m.macros());
      auto chk = check_symmetry(y, m.system(), sample_points(m, 50, 9));
      EXPECT_TRUE(chk.is_symmetry) << e.id << " " << d.name << " Y(h)=" << chk.lyh_max
                                   << " L_Y eta=" << chk.lie_eta_max;
      EXPECT_LE(chk.lyh_max, 1e-12) << e.id;
    }
  }
}

TEST(Symmetry, BrokenAwayFromSymmetricParameters) {
  const auto& e = get_model("damped_kg");
  Model m(e);  // eps = 0.5 pins u
  auto y = SymmetryField::parse(m.space(), e.symmetries[0].components);
  auto chk = check_symmetry(y, m.system(), sample_points(m, 20, 9));
  EXPECT_FALSE(chk.is_symmetry);
  EXPECT_GT(chk.lyh_max, 0.1);
}

TEST(Symmetry, CurrentsMatchExpectedText) {
  for (const auto& e : catalog()) {
    for (const auto& d : e.symmetries) {
      Model m = symmetric_model(e, d);
      auto y = SymmetryField::parse(m.space(), d.components, m.macros());
      Current f = current_from_symmetry(y, m.space());
      ASSERT_EQ(f.components.size(), d.expected_current.size());
      for (auto pt : sample_points(m, 10, 4)) {
        for (std::size_t a = 0; a < f.components.size(); ++a) {
          double want = eval(m.parse(d.expected_current[a]), pt);
          EXPECT_NEAR(eval(f.components[a], pt), want, 1e-14) << e.id << " component " << a;
        }
      }
    }
  }
}

TEST(Symmetry, ContactFormCanonical) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"});
  auto eta = contact_form(s);
  ASSERT_EQ(eta.size(), 2u);
  auto pt = s.make_point();
  pt[s.momentum(0, 0)] = 0.7;
  // eta^t = dz^t - p_t du
  EXPECT_DOUBLE_EQ(eval(eta[0][s.z(0)], pt), 1.0);
  EXPECT_DOUBLE_EQ(eval(eta[0][0], pt), -0.7);
  EXPECT_DOUBLE_EQ(eval(eta[0][s.z(1)], pt), 0.0);
}

TEST(Dissipation, ResidualOfExactFreeWaveIsTruncationOnly) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"});
  HdDWSystem sys(s, s.parse("(p_t^2 - p_x^2)/2"));
  Current f{{s.parse("p_t"), s.parse("p_x")}};
  auto build = [&](std::size_t n, std::size_t steps, double dt) {
    Trajectory tr;
    auto g = Grid::line(n, 0.0, 2 * M_PI);
    for (std::size_t k = 0; k < steps; ++k) {
      double t = k * dt;
      FieldState st(g, {"u", "p_t", "p_x", "z_t", "z_x"}, t);
      for (std::size_t i = 0; i < n; ++i) {
        double x = g.coordinate(0, i);
        st.channel("u")[i] = std::sin(x) * std::cos(t);
        st.channel("p_t")[i] = -std::sin(x) * std::sin(t);
        st.channel("p_x")[i] = -std::cos(x) * std::cos(t);
      }
      tr.snapshots.push_back(std::move(st));
    }
    return dissipation_residual(f, sys, tr).max_abs();
  };
  double e1 = build(32, 12, 0.05), e2 = build(64, 23, 0.025);
  EXPECT_LT(e2, 1e-2);
  EXPECT_NEAR(e1 / e2, 4.0, 0.5);
}

TEST(Dissipation, WeightedMomentumOfExactDecay) {
  const double lambda = 0.5;
  Trajectory tr;
  auto g = Grid::line(16, 0.0, 1.0, Boundary::Neumann);
  for (int k = 0; k < 5; ++k) {
    double t = 0.1 * k;
    FieldState st(g, {"p_t"}, t);
    for (std::size_t i = 0; i < g.size(); ++i) st.channel(0)[i] = std::exp(-lambda * t) * (1.0 + g.coordinate(0, i));
    tr.snapshots.push_back(std::move(st));
  }
  auto w = weighted_momentum_check(tr, lambda);
  EXPECT_LT(w.max_drift, 1e-14);
  EXPECT_NEAR(w.value[0], 1.5, 1e-14);  // trapezoid is exact for linear data
  auto off = weighted_momentum_check(tr, 0.0);
  EXPECT_NEAR(off.max_drift, 1.0 - std::exp(-0.2), 1e-12);
}
