#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kcontact/catalog.hpp"
#include "kcontact/regularity.hpp"

using namespace kcontact;

TEST(Classify, SyntheticMatrices) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0, 0, -2;
  auto c = classify_matrix(a);
  EXPECT_EQ(c.type, PDEType::Hyperbolic);
  EXPECT_EQ(c.signature, (InertiaSignature{1, 1, 0}));
  EXPECT_EQ(c.to_string(), "signature=(1,1,0) type=hyperbolic");

  a << 2, 1, 1, 2;
  EXPECT_EQ(classify_matrix(a).type, PDEType::Elliptic);
  a << -2, 1, 1, -2;
  EXPECT_EQ(classify_matrix(a).type, PDEType::Elliptic);
  a << 1, 1, 1, 1;
  EXPECT_EQ(classify_matrix(a).type, PDEType::Degenerate);
  EXPECT_EQ(classify_matrix(a).signature, (InertiaSignature{1, 0, 1}));

  Eigen::MatrixXd b = Eigen::Vector4d(1, 1, -1, -1).asDiagonal();
  EXPECT_EQ(classify_matrix(b).type, PDEType::Ultrahyperbolic);
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_EQ(classify_matrix(z).type, PDEType::Degenerate);
}

TEST(Classify, CatalogCanonicalModels) {
  for (const auto& e : catalog()) {
    if (!e.expected_type) continue;
    Model m(e);
    for (auto pt : sample_points(m, 5, 3)) {
      auto c = classify(m.system(), pt);
      EXPECT_EQ(c.type, *e.expected_type) << e.id;
      EXPECT_EQ(c.signature, *e.expected_signature) << e.id;
    }
  }
}

TEST(Classify, EllipticAndDegenerateHamiltonians) {
  auto s = PhaseSpace::make_canonical({"u"}, {"1", "2"});
  auto pt = s.make_point();
  EXPECT_EQ(classify(HdDWSystem(s, s.parse("(p_1^2 + p_2^2)/2 + u^2")), pt).type, PDEType::Elliptic);
  EXPECT_EQ(classify(HdDWSystem(s, s.parse("p_1 + p_2^2/2")), pt).type, PDEType::Degenerate);
}

TEST(Regularity, DetectsSingularHessian) {
  auto s = PhaseSpace::make_canonical({"u"}, {"t", "x"});
  HdDWSystem good(s, s.parse("(p_t^2 - p_x^2)/2"));
  HdDWSystem bad(s, s.parse("(p_t + p_x)^2/2"));
  std::vector<std::vector<double>> samples{s.make_point(), s.make_point()};
  samples[1][1] = 0.3;
  auto rg = check_regular(good, samples);
  EXPECT_TRUE(rg.regular);
  EXPECT_NEAR(rg.min_relative_det, 1.0, 1e-14);
  auto rb = check_regular(bad, samples);
  EXPECT_FALSE(rb.regular);
  EXPECT_EQ(rb.first_singular, 0u);
  std::vector<double> v{1.0, 0.5};
  auto p = samples[0];
  EXPECT_THROW(invert_momenta(bad, p, v), SingularityError);
}

TEST(Regularity, InversionRoundTripOnCatalog) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (const auto& e : catalog()) {
    Model m(e);
    const auto& sys = m.system();
    const auto block = m.space().momentum_block();
    PointWorkspace ws;
    for (auto pt : sample_points(m, 20, 5)) {
      // Adapted Hessians are off-diagonal in the fibre momenta and stay regular.
      auto exact = pt;
      const auto& g = sys.gradient(exact, ws);
      std::vector<double> v;
      for (auto c : block) v.push_back(g.d(c));
      auto guess = pt;
      for (auto c : block) guess[c] = uni(rng) * 0.1;
      auto r = invert_momenta(sys, guess, v);
      for (auto c : block) EXPECT_NEAR(guess[c], exact[c], 1e-10) << e.id;
      EXPECT_LE(r.iterations, 5) << e.id;
    }
  }
}

TEST(Regularity, PorousMediumMeasureSlope) {
  for (double mexp : {2.0, 3.0}) {
    Model m(get_model("pme_absorption"), {{"m", mexp}});
    auto pt = m.space().make_point();
    std::vector<double> lu, ld;
    for (double u : {0.01, 0.02, 0.05, 0.1, 0.2}) {
      pt[0] = u;
      lu.push_back(std::log(u));
      ld.push_back(std::log(degeneracy_measure(m.system(), pt)));
    }
    std::vector<double> hu(lu.size()), hd(ld.size());
    for (std::size_t i = 0; i < lu.size(); ++i) hu[i] = std::exp(lu[i]), hd[i] = std::exp(ld[i]);
    double slope = fitted_order(hu, hd);
    EXPECT_NEAR(slope, mexp - 1.0, 1e-10);
  }
}

TEST(Reconstruct, WaveEquationResidual) {
  Model m(get_model("damped_wave"), {{"rho", 2.0}, {"tau", 3.0}, {"kappa", 0.5}});
  auto pde = m.reconstructed();
  EXPECT_EQ(pde.time_order(), 2);
  Jet j(1, 2);
  j.u[0] = 0.1;
  j.d(0, 0) = 0.4;
  j.d(0, 1) = -0.2;
  j.set_dd(0, 0, 0, 1.5);
  j.set_dd(0, 1, 1, 0.7);
  j.z = {0.0, 0.0};
  double r[1];
  pde.evaluate(j, r);
  // rho (u_tt - tau/rho u_xx + kappa u_t)
  EXPECT_NEAR(r[0], 2.0 * 1.5 - 3.0 * 0.7 + 2.0 * 0.5 * 0.4, 1e-12);
}

TEST(Reconstruct, ContactExponents) {
  Model a(get_model("damped_sg"));
  auto la = contact_exponents(a.system(), sample_points(a, 5, 1));
  ASSERT_TRUE(la);
  EXPECT_NEAR((*la)[0], 1.0, 1e-8);
  Model b(get_model("damped_kg"));
  auto lb = contact_exponents(b.system(), sample_points(b, 5, 1));
  ASSERT_TRUE(lb);
  EXPECT_NEAR((*lb)[0], 2.0, 1e-8);
}
