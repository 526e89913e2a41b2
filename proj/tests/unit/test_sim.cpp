#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kcontact/catalog.hpp"
#include "kcontact/sim.hpp"

using namespace kcontact;

namespace {

double max_error(const FieldState& s, std::string_view ch, const std::function<double(double)>& exact) {
  double e = 0.0;
  auto f = s.channel(ch);
  for (std::size_t i = 0; i < f.size(); ++i) e = std::max(e, std::fabs(f[i] - exact(s.grid().coordinate(0, i))));
  return e;
}

// Viscous Burgers u_t + u u_x = nu u_xx from u(0) = sin x, by Cole-Hopf.
double cole_hopf(double t, double x, double nu) {
  double a = 1.0 / (2.0 * nu), num = 0.0, den = std::cyl_bessel_i(0.0, a);
  for (int n = 1; n <= 60; ++n) {
    double c = std::cyl_bessel_i(static_cast<double>(n), a) * std::exp(-nu * n * n * t);
    num += 2.0 * n * c * std::sin(n * x);
    den += 2.0 * c * std::cos(n * x);
  }
  return 2.0 * nu * num / den;
}

}  // namespace

TEST(Sim, ColeHopfReference) {
  EXPECT_NEAR(cole_hopf(0.5, 1.0, 0.1), 0.6152961352068722, 1e-12);
  EXPECT_NEAR(cole_hopf(0.0, 1.1, 0.1), std::sin(1.1), 1e-12);
}

TEST(Sim, FittedOrder) {
  std::vector<double> h{0.1, 0.05, 0.025}, e{1e-2, 2.5e-3, 6.25e-4};
  EXPECT_NEAR(fitted_order(h, e), 2.0, 1e-12);
}

TEST(Sim, RefineGrid) {
  EXPECT_EQ(refine(Grid::line(16, 0, 1)).points[0], 32u);
  EXPECT_EQ(refine(Grid::line(17, 0, 1, Boundary::Dirichlet)).points[0], 33u);
}

TEST(Sim, FreeWaveConvergesAtSecondOrder) {
  Model m(get_model("damped_wave"), {{"kappa", 0.0}});
  std::vector<double> h, err;
  for (std::size_t n : {32u, 64u, 128u}) {
    SimConfig cfg = m.default_sim();
    cfg.grid = Grid::line(n, 0.0, 2 * M_PI);
    cfg.t_end = 1.0;
    set_initial(cfg, {{"u", "sin(x)"}, {"u_t", "0"}});
    RunInfo info;
    auto tr = run_hddw(m.system(), cfg, &info);
    EXPECT_NEAR(tr.snapshots.back().time(), 1.0, 1e-12);
    h.push_back(cfg.grid.spacing(0));
    err.push_back(max_error(tr.snapshots.back(), "u", [](double x) { return std::sin(x) * std::cos(1.0); }));
  }
  EXPECT_GE(fitted_order(h, err), 1.9);
  EXPECT_LT(err.back(), 1e-3);
}

TEST(Sim, BurgersMatchesColeHopf) {
  Model m(get_model("burgers_family"));
  std::vector<double> h, err;
  for (std::size_t n : {32u, 64u, 128u}) {
    SimConfig cfg = m.default_sim();
    cfg.grid = Grid::line(n, 0.0, 2 * M_PI);
    cfg.t_end = 1.0;
    auto tr = run_hddw(m.system(), cfg);
    h.push_back(cfg.grid.spacing(0));
    err.push_back(max_error(tr.snapshots.back(), "u", [](double x) { return cole_hopf(1.0, x, 0.1); }));
  }
  EXPECT_GE(fitted_order(h, err), 1.9);
}

TEST(Sim, DirectSolverAgreesWithHdDW) {
  Model m(get_model("fisher_kpp"));
  SimConfig cfg = m.default_sim();
  cfg.grid = Grid::line(32, 0.0, 2 * M_PI);
  cfg.t_end = 0.25;
  auto rep = cross_validate(m.system(), m.target_pde(), cfg, 3);
  ASSERT_EQ(rep.levels.size(), 3u);
  EXPECT_GE(rep.order, 1.9);
  EXPECT_EQ(rep.fields, (std::vector<std::string>{"u"}));
}

TEST(Sim, NeumannKinkStaysAKink) {
  // A stationary sine-Gordon kink 4 atan(e^x) is an exact solution without damping.
  Model m(get_model("damped_sg"), {{"lambda", 0.0}});
  SimConfig cfg = m.default_sim();
  cfg.grid = Grid::line(201, -10.0, 10.0, Boundary::Neumann);
  cfg.t_end = 1.0;
  auto kink = [](double x) { return 4.0 * std::atan(std::exp(x)); };
  cfg.initial["u"] = SpaceTimeFunction([&](double, std::span<const double> x) { return kink(x[0]); });
  cfg.initial["u_t"] = SpaceTimeFunction::constant(0.0);
  auto tr = run_hddw(m.system(), cfg);
  EXPECT_LT(max_error(tr.snapshots.back(), "u", kink), 5e-3);
}

TEST(Sim, RejectsUnstableStep) {
  Model m(get_model("damped_wave"));
  SimConfig cfg = m.default_sim();
  cfg.grid = Grid::line(64, 0.0, 2 * M_PI);
  cfg.dt = 1.0;
  EXPECT_THROW(run_hddw(m.system(), cfg), StabilityError);
  cfg.dt = 0.0;
  EXPECT_LE(stable_dt(m.system(), cfg), 0.9 * cfg.grid.spacing(0) + 1e-15);
}

TEST(Sim, PorousMediumRefusesSmallData) {
  Model m(get_model("pme_absorption"));
  SimConfig cfg = m.default_sim(1e-3);
  cfg.grid = Grid::line(32, 0.0, 2 * M_PI);
  set_initial(cfg, {{"u", "0.5 + 0.5*sin(x)"}});
  EXPECT_THROW(run_hddw(m.system(), cfg), DomainRestrictionError);
}

TEST(Sim, PinnedFieldsStayZero) {
  Model m(get_model("fitzhugh_nagumo"));
  SimConfig cfg = m.default_sim();
  cfg.grid = Grid::line(32, 0.0, 2 * M_PI);
  cfg.t_end = 0.5;
  auto tr = run_hddw(m.system(), cfg);
  for (const auto& s : tr.snapshots)
    for (const char* ch : {"r", "s", "pu_x", "pv_x"})
      for (double v : s.channel(ch)) ASSERT_EQ(v, 0.0) << ch;
}

TEST(Sim, SpaceTimeFunctionText) {
  auto f = SpaceTimeFunction::parse("a*sin(x)*exp(-t)", 1, {{"a", 2.0}});
  double x[1] = {0.3}, g[2];
  EXPECT_NEAR(f(0.5, x), 2.0 * std::sin(0.3) * std::exp(-0.5), 1e-15);
  f.gradient(0.5, x, g);
  EXPECT_NEAR(g[0], -2.0 * std::sin(0.3) * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(g[1], 2.0 * std::cos(0.3) * std::exp(-0.5), 1e-15);
  EXPECT_THROW(SpaceTimeFunction::parse("y", 1), ParseError);
  EXPECT_EQ(spatial_names(3), (std::vector<std::string>{"x1", "x2", "x3"}));
}

TEST(Sim, SnapshotCsvRoundTrip) {
  auto g = Grid::line(5, 0.0, 1.0, Boundary::Dirichlet);
  FieldState s(g, {"u", "p_t"}, 0.25);
  for (std::size_t i = 0; i < 5; ++i) {
    s.channel(0)[i] = 0.1 * i + 1.0 / 3.0;
    s.channel(1)[i] = -std::sqrt(2.0) * i;
  }
  std::stringstream ss;
  write_snapshot_csv(ss, s);
  FieldState r = read_snapshot_csv(ss, g, 0.25);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.channel(c)[i], s.channel(c)[i]);
}

TEST(Sim, LiftRebuildsMomenta) {
  Model m(get_model("damped_wave"), {{"kappa", 0.0}});
  SimConfig cfg = m.default_sim();
  cfg.grid = Grid::line(64, 0.0, 2 * M_PI);
  cfg.t_end = 0.5;
  auto full = run_hddw(m.system(), cfg);
  Trajectory fields;
  for (const auto& s : full.snapshots) {
    FieldState f(s.grid(), {"u"}, s.time());
    std::copy(s.channel("u").begin(), s.channel("u").end(), f.channel(0).begin());
    fields.snapshots.push_back(std::move(f));
  }
  auto lifted = m.lift(fields);
  const auto& a = lifted.snapshots[lifted.size() / 2];
  const auto& b = full.snapshots[full.size() / 2];
  double e = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i)
    e = std::max(e, std::fabs(a.channel("p_x")[i] - b.channel("p_x")[i]));
  EXPECT_LT(e, 1e-12);
}
