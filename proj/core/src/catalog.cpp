#include "kcontact/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kcontact {

PhaseSpace SpaceSpec::build(std::vector<Parameter> params) const {
  if (kind == SpaceKind::Canonical) return PhaseSpace::make_canonical(fields, independents, std::move(params));
  return PhaseSpace::make_adapted(fields, fibre, theta, std::move(params));
}

TargetContext::TargetContext(const PhaseSpace& space, const Macros& macros, std::vector<std::string> fields)
    : space_(&space), point_(space.make_point()) {
  for (const auto& f : fields) field_index_.push_back(space.vocabulary().index_of(f));
  for (std::size_t i = 0; i < macros.size(); ++i) {
    Macros before(macros.begin(), macros.begin() + static_cast<long>(i));
    macros_.emplace(macros[i].first, CompiledExpr(space.parse(macros[i].second, before)));
  }
}

void TargetContext::load(const Jet& jet, std::vector<double>& pt) const {
  pt = point_;
  for (std::size_t i = 0; i < field_index_.size(); ++i) pt[field_index_[i]] = jet.u[i];
}

double TargetContext::m(std::string_view macro, const Jet& jet) const {
  thread_local std::vector<double> pt;
  thread_local EvalWorkspace ws;
  auto it = macros_.find(macro);
  if (it == macros_.end()) throw std::out_of_range("unknown macro '" + std::string(macro) + "'");
  load(jet, pt);
  return it->second.value(pt, ws);
}

double TargetContext::dm(std::string_view macro, const Jet& jet, std::string_view field) const {
  thread_local std::vector<double> pt;
  thread_local EvalWorkspace ws;
  thread_local DualValue d;
  auto it = macros_.find(macro);
  if (it == macros_.end()) throw std::out_of_range("unknown macro '" + std::string(macro) + "'");
  load(jet, pt);
  std::size_t wrt[1] = {space_->vocabulary().index_of(field)};
  it->second.derive(pt, wrt, 1, ws, d);
  return d.gradient[0];
}

namespace {

using Ctx = TargetContext;

std::function<double(const Ctx&)> unit() {
  return [](const Ctx&) { return 1.0; };
}

SpaceSpec canonical_1d() {
  SpaceSpec s;
  s.kind = SpaceKind::Canonical;
  s.fields = {"u"};
  s.independents = {"t", "x"};
  return s;
}

SpaceSpec adapted_pair(std::vector<std::string> fibre) {
  SpaceSpec s;
  s.kind = SpaceKind::Adapted;
  s.fields = {"u", "v"};
  s.fibre = std::move(fibre);
  s.theta = {"-v/2", "u/2"};
  return s;
}

SpaceSpec adapted_quad(std::vector<std::string> base, std::vector<std::string> fibre) {
  SpaceSpec s;
  s.kind = SpaceKind::Adapted;
  // theta = 1/2 (-c da + a dc - d db + b dd) for base (a, b, c, d)
  s.theta = {"-" + base[2] + "/2", "-" + base[3] + "/2", base[0] + "/2", base[1] + "/2"};
  s.fields = std::move(base);
  s.fibre = std::move(fibre);
  return s;
}

TargetSpec wave_target(std::string display, std::function<double(const Ctx&)> scale,
                       std::function<double(const Ctx&, const Jet&)> rest) {
  TargetSpec t;
  t.display = std::move(display);
  t.fields = {"u"};
  t.time_order = 2;
  t.k = 2;
  t.scale = std::move(scale);
  t.residual = [rest = std::move(rest)](const Ctx& c, const Jet& j, std::span<double> out) { out[0] = rest(c, j); };
  return t;
}

const InertiaSignature kLorentz2{1, 1, 0};

std::vector<ModelEntry> build_catalog() {
  std::vector<ModelEntry> out;

  {
    ModelEntry m;
    m.id = "damped_wave";
    m.title = "Damped wave";
    m.space = canonical_1d();
    m.params = {{"rho", 1.0}, {"tau", 1.0}, {"kappa", 0.5}};
    m.hamiltonian = "p_t^2/(2*rho) - p_x^2/(2*tau) + kappa*z_t";
    m.expected_signature = kLorentz2;
    m.expected_type = PDEType::Hyperbolic;
    m.symmetries.push_back({"translation", {{"u", "1"}}, {}, {}, {"p_t", "p_x"}});
    m.target = wave_target("u_tt - c^2 u_xx + kappa u_t = 0, c^2 = tau/rho",
                           [](const Ctx& c) { return c.p("rho"); },
                           [](const Ctx& c, const Jet& j) {
                             return j.dd(0, 0, 0) - c.p("tau") / c.p("rho") * j.dd(0, 1, 1) + c.p("kappa") * j.d(0, 0);
                           });
    m.derivation_notes = {"p_t = rho u_t", "p_x = -tau u_x"};
    m.sim.initial = {{"u", "sin(x)"}, {"u_t", "1 + 0.5*sin(x)"}};
    m.sim.t_end = 2.0;
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "damped_kg";
    m.title = "Damped Klein-Gordon with quadratic contact term";
    m.space = canonical_1d();
    m.params = {{"c", 1.0}, {"eps", 0.5}, {"lambda", 0.5}};
    m.hamiltonian = "(p_t^2 - p_x^2/c^2)/2 + z_t^2/2 + eps*u^2/2";
    m.expected_signature = kLorentz2;
    m.expected_type = PDEType::Hyperbolic;
    m.symmetries.push_back({"translation", {{"u", "1"}}, {{"eps", 0.0}}, {}, {"p_t", "p_x"}});
    m.target = wave_target("u_tt - c^2 u_xx + z_t u_t + eps u = 0", unit(), [](const Ctx& c, const Jet& j) {
      double cc = c.p("c");
      return j.dd(0, 0, 0) - cc * cc * j.dd(0, 1, 1) + j.z[0] * j.d(0, 0) + c.p("eps") * j.u[0];
    });
    m.derivation_notes = {"p_t = u_t", "p_x = -c^2 u_x"};
    m.sim.initial = {{"u", "exp(-4*(x - pi)^2)"}, {"u_t", "0"}};
    m.sim.z_profile = "lambda";
    m.sim.t_end = 2.0;
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "damped_dsg";
    m.title = "Damped double sine-Gordon";
    m.space = canonical_1d();
    m.params = {{"c", 1.0}, {"a", 1.0}, {"b", 0.25}, {"lambda", 0.1}};
    m.hamiltonian = "(p_t^2 - p_x^2/c^2)/2 + a*(1 - cos(u)) + b*(1 - cos(2*u)) + z_t^2/2";
    m.expected_signature = kLorentz2;
    m.expected_type = PDEType::Hyperbolic;
    m.target = wave_target("u_tt - c^2 u_xx + a sin u + 2b sin 2u + z_t u_t = 0", unit(),
                           [](const Ctx& c, const Jet& j) {
                             double cc = c.p("c"), u = j.u[0];
                             return j.dd(0, 0, 0) - cc * cc * j.dd(0, 1, 1) + c.p("a") * std::sin(u) +
                                    2.0 * c.p("b") * std::sin(2.0 * u) + j.z[0] * j.d(0, 0);
                           });
    m.derivation_notes = {"p_t = u_t", "p_x = -c^2 u_x"};
    m.sim.initial = {{"u", "2*exp(-2*(x - pi)^2)"}, {"u_t", "0"}};
    m.sim.z_profile = "lambda";
    m.sim.t_end = 2.0;
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "allen_cahn";
    m.title = "Allen-Cahn / reaction-diffusion";
    m.space = adapted_pair({"p_x", "q_x"});
    m.params = {{"nu", 1.0}, {"lambda", 0.0}};
    m.macros = {{"Vp", "u^3 - u"}};
    m.hamiltonian = "-p_x*q_x/nu + v*(Vp + lambda*u)";
    m.reduction = Reduction{{"u"}, {"v"}, {"v"}, {"v", "p_x"}};
    TargetSpec t;
    t.display = "u_t - nu u_xx + V'(u) + lambda u = 0";
    t.fields = {"u"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      out[0] = j.d(0, 0) - c.p("nu") * j.dd(0, 1, 1) + c.m("Vp", j) + c.p("lambda") * j.u[0];
    };
    m.target = t;
    m.derivation_notes = {"q_x = -nu u_x", "p_x = -nu v_x", "v = 0, p_x = 0 (reduction)"};
    m.sim.initial = {{"u", "0.5*sin(x)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "burgers_family";
    m.title = "Generalized Burgers family";
    m.space = adapted_pair({"pu_x", "pv_x"});
    m.params = {{"nu", 0.1}};
    m.macros = {{"D", "nu"}, {"B", "u"}, {"C", "0"}};
    m.hamiltonian = "-pu_x*pv_x/D - B/D*z_x + v*C";
    m.reduction = Reduction{{"u"}, {"v"}, {"v"}, {"v", "pu_x"}};
    TargetSpec t;
    t.display = "u_t - (D(u) u_x)_x + B(u) u_x + C(u) = 0";
    t.fields = {"u"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      double ux = j.d(0, 1);
      out[0] = j.d(0, 0) - c.m("D", j) * j.dd(0, 1, 1) - c.dm("D", j, "u") * ux * ux + c.m("B", j) * ux + c.m("C", j);
    };
    m.target = t;
    m.derivation_notes = {"pv_x = -D(u) u_x", "pu_x = -D(u) v_x", "v = 0, pu_x = 0 (reduction)"};
    m.sim.initial = {{"u", "sin(x)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "pme_absorption";
    m.title = "Porous medium with linear absorption";
    m.space = adapted_pair({"p_x", "q_x"});
    m.params = {{"m", 2.0}, {"b", 0.5}};
    m.hamiltonian = "-p_x*q_x/(m*u^(m - 1)) + 2*b*z_t";
    m.reduction = Reduction{{"u"}, {"v"}, {"v"}, {"v", "p_x"}};
    m.lower_bounds = {{"u", 0.0}};
    TargetSpec t;
    t.display = "u_t - (u^m)_xx + b u = 0";
    t.fields = {"u"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      double mm = c.p("m"), u = j.u[0], ux = j.d(0, 1);
      double lap = mm * std::pow(u, mm - 1) * j.dd(0, 1, 1) + mm * (mm - 1) * std::pow(u, mm - 2) * ux * ux;
      out[0] = j.d(0, 0) - lap + c.p("b") * u;
    };
    m.target = t;
    m.derivation_notes = {"q_x = -m u^(m-1) u_x = -(u^m)_x", "v = 0, p_x = 0 (reduction)"};
    m.sim.initial = {{"u", "1 + 0.5*sin(x)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "cgl";
    m.title = "Complex Ginzburg-Landau (real form)";
    m.space = adapted_quad({"a", "b", "c", "d"}, {"pa_x", "pb_x", "qa_x", "qb_x"});
    m.params = {{"alpha", 0.5}, {"beta", 0.3}, {"gamma", 0.1}};
    m.macros = {{"Ra", "a - (a^2 + b^2)*a + beta*(a^2 + b^2)*b"}, {"Rb", "b - beta*(a^2 + b^2)*a - (a^2 + b^2)*b"}};
    m.hamiltonian =
        "-(pa_x*(qa_x + alpha*qb_x) + pb_x*(-alpha*qa_x + qb_x))/(1 + alpha^2) - c*Ra - d*Rb + 2*gamma*z_t";
    m.reduction = Reduction{{"a", "b"}, {"c", "d"}, {"c", "d"}, {"c", "d", "pa_x", "pb_x"}};
    TargetSpec t;
    t.display = "psi_t = (1 + i alpha) psi_xx + (1 - gamma) psi - (1 + i beta)|psi|^2 psi, psi = a + i b";
    t.fields = {"a", "b"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      double al = c.p("alpha"), g = c.p("gamma");
      out[0] = j.d(0, 0) - j.dd(0, 1, 1) + al * j.dd(1, 1, 1) - c.m("Ra", j) + g * j.u[0];
      out[1] = j.d(1, 0) - al * j.dd(0, 1, 1) - j.dd(1, 1, 1) - c.m("Rb", j) + g * j.u[1];
    };
    m.target = t;
    m.derivation_notes = {"qa_x = -a_x + alpha b_x", "qb_x = -alpha a_x - b_x",
                          "c = d = pa_x = pb_x = 0 (reduction)"};
    m.sim.initial = {{"a", "0.5*cos(x)"}, {"b", "0.5*sin(x)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "damped_nls";
    m.title = "Damped nonlinear Schroedinger (real form)";
    m.space = adapted_quad({"a", "b", "c", "d"}, {"pa_x", "pb_x", "qa_x", "qb_x"});
    m.params = {{"gamma", 0.1}};
    m.macros = {{"Ra", "-(a^2 + b^2)*b - gamma*a"}, {"Rb", "(a^2 + b^2)*a - gamma*b"}};
    m.hamiltonian = "-pa_x*qb_x + pb_x*qa_x - c*Ra - d*Rb";
    m.reduction = Reduction{{"a", "b"}, {"c", "d"}, {"c", "d"}, {"c", "d", "pa_x", "pb_x"}};
    TargetSpec t;
    t.display = "i psi_t + psi_xx + |psi|^2 psi + i gamma psi = 0, psi = a + i b";
    t.fields = {"a", "b"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      out[0] = j.d(0, 0) + j.dd(1, 1, 1) - c.m("Ra", j);
      out[1] = j.d(1, 0) - j.dd(0, 1, 1) - c.m("Rb", j);
    };
    m.target = t;
    m.derivation_notes = {"qa_x = b_x", "qb_x = -a_x", "c = d = pa_x = pb_x = 0 (reduction)"};
    m.sim.initial = {{"a", "0.5*cos(x)"}, {"b", "0.2*sin(2*x)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "fisher_kpp";
    m.title = "Fisher-KPP with linear loss";
    m.space = adapted_pair({"p_x", "q_x"});
    m.params = {{"mu", 1.0}, {"r", 1.0}, {"lambda", 0.0}};
    m.hamiltonian = "-p_x*q_x/mu + v*(-r*u*(1 - u) + lambda*u)";
    m.reduction = Reduction{{"u"}, {"v"}, {"v"}, {"v", "p_x"}};
    TargetSpec t;
    t.display = "u_t - mu u_xx - r u (1 - u) + lambda u = 0";
    t.fields = {"u"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      double u = j.u[0];
      out[0] = j.d(0, 0) - c.p("mu") * j.dd(0, 1, 1) - c.p("r") * u * (1 - u) + c.p("lambda") * u;
    };
    m.target = t;
    m.derivation_notes = {"q_x = -mu u_x", "p_x = -mu v_x", "v = 0, p_x = 0 (reduction)"};
    m.sim.initial = {{"u", "0.1*exp(-4*(x - pi)^2)"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "phi4_3p1";
    m.title = "Damped phi^4 on R^{3,1}";
    m.space.kind = SpaceKind::Canonical;
    m.space.fields = {"phi"};
    m.space.independents = {"0", "1", "2", "3"};
    m.params = {{"m", 1.0}, {"g", 1.0}, {"lambda", 0.1}};
    m.hamiltonian = "(p_0^2 - p_1^2 - p_2^2 - p_3^2)/2 + m^2*phi^2/2 + g*phi^4/4 + lambda*z_0";
    m.expected_signature = InertiaSignature{1, 3, 0};
    m.expected_type = PDEType::Hyperbolic;
    TargetSpec t;
    t.display = "phi_tt - laplacian(phi) + m^2 phi + g phi^3 + lambda phi_t = 0";
    t.fields = {"phi"};
    t.time_order = 2;
    t.k = 4;
    t.scale = unit();
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      double ph = j.u[0], mm = c.p("m");
      double v = j.dd(0, 0, 0) - j.dd(0, 1, 1) - j.dd(0, 2, 2) - j.dd(0, 3, 3);
      out[0] = v + mm * mm * ph + c.p("g") * ph * ph * ph + c.p("lambda") * j.d(0, 0);
    };
    m.target = t;
    m.derivation_notes = {"p_0 = phi_t", "p_i = -phi_i, i = 1, 2, 3"};
    m.sim.points = {16, 16, 16};
    m.sim.lower = {0.0, 0.0, 0.0};
    m.sim.upper = {6.283185307179586, 6.283185307179586, 6.283185307179586};
    m.sim.initial = {{"phi", "0.5*sin(x1)*sin(x2)*sin(x3)"}, {"phi_t", "0"}};
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "damped_sg";
    m.title = "Damped sine-Gordon";
    m.space = canonical_1d();
    m.params = {{"c", 1.0}, {"lambda", 0.1}};
    m.hamiltonian = "(p_t^2 - p_x^2/c^2)/2 + (1 - cos(u)) + lambda*z_t";
    m.expected_signature = kLorentz2;
    m.expected_type = PDEType::Hyperbolic;
    m.target = wave_target("u_tt - c^2 u_xx + sin u + lambda u_t = 0", unit(), [](const Ctx& c, const Jet& j) {
      double cc = c.p("c");
      return j.dd(0, 0, 0) - cc * cc * j.dd(0, 1, 1) + std::sin(j.u[0]) + c.p("lambda") * j.d(0, 0);
    });
    m.derivation_notes = {"p_t = u_t", "p_x = -c^2 u_x"};
    m.sim.initial = {{"u", "2*exp(-2*(x - pi)^2)"}, {"u_t", "0"}};
    m.sim.t_end = 2.0;
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "damped_sg_quad";
    m.title = "Damped sine-Gordon, quadratic contact term";
    m.space = canonical_1d();
    m.params = {{"c", 1.0}, {"lambda", 0.1}};
    m.hamiltonian = "(p_t^2 - p_x^2/c^2)/2 + (1 - cos(u)) + z_t^2/2";
    m.expected_signature = kLorentz2;
    m.expected_type = PDEType::Hyperbolic;
    m.target = wave_target("u_tt - c^2 u_xx + sin u + z_t u_t = 0", unit(), [](const Ctx& c, const Jet& j) {
      double cc = c.p("c");
      return j.dd(0, 0, 0) - cc * cc * j.dd(0, 1, 1) + std::sin(j.u[0]) + j.z[0] * j.d(0, 0);
    });
    m.derivation_notes = {"p_t = u_t", "p_x = -c^2 u_x"};
    m.sim.initial = {{"u", "2*exp(-2*(x - pi)^2)"}, {"u_t", "0"}};
    m.sim.z_profile = "lambda";
    m.sim.t_end = 2.0;
    out.push_back(m);
  }
  {
    ModelEntry m;
    m.id = "fitzhugh_nagumo";
    m.title = "FitzHugh-Nagumo";
    m.space = adapted_quad({"u", "v", "r", "s"}, {"pu_x", "pv_x", "qu_x", "qv_x"});
    m.params = {{"Du", 1.0}, {"Dv", 0.5}, {"eps", 0.08}, {"a", 0.8}, {"I", 0.0}, {"c", 0.0}};
    m.macros = {{"f", "u - u^3/3"}};
    m.hamiltonian = "-pu_x*qu_x/Du - pv_x*qv_x/Dv - r*(f - v + I) - s*eps*(u - a*v)";
    m.reduction = Reduction{{"u", "v"}, {"r", "s"}, {"r", "s"}, {"r", "s", "pu_x", "pv_x"}};
    m.symmetries.push_back({"affine shift",
                            {{"u", "1"}, {"v", "1/a"}, {"z_t", "(r + s/a)/2"}},
                            {},
                            {{"f", "u/a + c"}},
                            {"-(r + s/a)", "pu_x + pv_x/a"}});
    TargetSpec t;
    t.display = "u_t = Du u_xx + f(u) - v + I, v_t = Dv v_xx + eps (u - a v)";
    t.fields = {"u", "v"};
    t.time_order = 1;
    t.scale = [](const Ctx&) { return -1.0; };
    t.residual = [](const Ctx& c, const Jet& j, std::span<double> out) {
      out[0] = j.d(0, 0) - c.p("Du") * j.dd(0, 1, 1) - c.m("f", j) + j.u[1] - c.p("I");
      out[1] = j.d(1, 0) - c.p("Dv") * j.dd(1, 1, 1) - c.p("eps") * (j.u[0] - c.p("a") * j.u[1]);
    };
    m.target = t;
    m.derivation_notes = {"qu_x = -Du u_x", "qv_x = -Dv v_x", "r = s = pu_x = pv_x = 0 (reduction)"};
    m.sim.initial = {{"u", "exp(-4*(x - pi)^2)"}, {"v", "0"}};
    out.push_back(m);
  }
  return out;
}

ModelEntry candidate(std::string id, std::string title, std::vector<Parameter> params, std::string h) {
  ModelEntry m;
  m.id = std::move(id);
  m.title = std::move(title);
  m.space = canonical_1d();
  m.params = std::move(params);
  m.hamiltonian = std::move(h);
  m.candidate = true;
  return m;
}

std::vector<ModelEntry> build_candidates() {
  std::vector<ModelEntry> out;
  out.push_back(candidate("damped_phi4_1p1", "Damped phi^4 field", {{"c", 1.0}, {"m", 1.0}, {"beta", 1.0}, {"lambda", 0.1}},
                          "(p_t^2 - p_x^2/c^2)/2 + m^2*u^2/2 + beta*u^4/4 + lambda*z_t"));
  out.push_back(candidate("driven_josephson", "Driven Josephson-type junction",
                          {{"c", 1.0}, {"I", 0.1}, {"lambda", 0.1}},
                          "(p_t^2 - p_x^2/c^2)/2 + (1 - cos(u)) - I*u + lambda*z_t"));
  out.push_back(candidate("damped_telegraph", "Damped nonlinear telegraph equation",
                          {{"c", 1.0}, {"lambda", 0.1}}, "(p_t^2 - p_x^2/c^2)/2 + W + lambda*z_t"));
  out.back().macros = {{"W", "u^2/2"}};
  {
    ModelEntry m = candidate("coupled_dissipative_fields", "Coupled dissipative scalar fields",
                             {{"cu", 1.0}, {"cv", 1.0}, {"lambda", 0.1}},
                             "(p_u_t^2 - p_u_x^2/cu^2 + p_v_t^2 - p_v_x^2/cv^2)/2 + V + lambda*z_t");
    m.space.fields = {"u", "v"};
    m.macros = {{"V", "(u^2 + v^2)/2 + u^2*v^2/4"}};
    out.push_back(m);
  }
  {
    ModelEntry m = candidate("damped_anisotropic_wave", "Damped anisotropic wave equation",
                             {{"c1", 1.0}, {"c2", 2.0}, {"lambda", 0.1}},
                             "(p_t^2 - p_x^2/c1^2 - p_y^2/c2^2)/2 + V + lambda*z_t");
    m.space.independents = {"t", "x", "y"};
    m.macros = {{"V", "1 - cos(u)"}};
    out.push_back(m);
  }
  return out;
}

}  // namespace

const std::vector<ModelEntry>& catalog() {
  static const std::vector<ModelEntry> models = build_catalog();
  return models;
}

std::vector<std::string> list_models() {
  std::vector<std::string> ids;
  for (const auto& m : catalog()) ids.push_back(m.id);
  return ids;
}

const std::vector<ModelEntry>& candidates() {
  static const std::vector<ModelEntry> models = build_candidates();
  return models;
}

const ModelEntry& get_model(std::string_view id) {
  for (const auto& m : catalog())
    if (m.id == id) return m;
  for (const auto& m : candidates())
    if (m.id == id) return m;
  std::ostringstream os;
  os << "unknown model '" << id << "'; known models:";
  for (const auto& m : catalog()) os << ' ' << m.id;
  throw std::invalid_argument(os.str());
}

// ---------------------------------------------------------------------------

Model::Model(const ModelEntry& entry, const ParamOverrides& params, const Macros& macro_overrides)
    : entry_(&entry), macros_(entry.macros) {
  for (const auto& [name, body] : macro_overrides) {
    auto it = std::find_if(macros_.begin(), macros_.end(), [&](const auto& m) { return m.first == name; });
    if (it != macros_.end())
      it->second = body;
    else
      macros_.emplace_back(name, body);
  }
  PhaseSpace space = entry.space.build(entry.params).with_parameters(params);
  Expr h = space.parse(entry.hamiltonian, macros_);
  system_ = std::make_shared<HdDWSystem>(std::move(space), std::move(h));
}

SecondOrderPDE Model::target_pde() const {
  if (!entry_->target) throw std::logic_error("model '" + entry_->id + "' has no target equation");
  const TargetSpec& t = *entry_->target;
  auto ctx = std::make_shared<TargetContext>(space(), macros_, t.fields);
  auto fn = t.residual;
  return SecondOrderPDE(t.display, t.fields, t.k, t.time_order, t.fields.size(),
                        [ctx, fn](const Jet& j, std::span<double> out) { fn(*ctx, j, out); });
}

double Model::target_scale() const {
  if (!entry_->target) throw std::logic_error("model '" + entry_->id + "' has no target equation");
  TargetContext ctx(space(), macros_, entry_->target->fields);
  return entry_->target->scale(ctx);
}

namespace {
std::vector<std::size_t> field_indices(const PhaseSpace& sp, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    auto it = std::find(sp.field_names().begin(), sp.field_names().end(), n);
    if (it == sp.field_names().end()) throw std::invalid_argument("'" + n + "' is not a field of the space");
    out.push_back(static_cast<std::size_t>(it - sp.field_names().begin()));
  }
  return out;
}
}  // namespace

std::vector<std::size_t> Model::evolved_fields() const {
  if (!entry_->reduction) {
    std::vector<std::size_t> all(space().n());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  return field_indices(space(), entry_->reduction->evolved);
}

std::vector<std::size_t> Model::pinned_fields() const {
  if (!entry_->reduction) return {};
  return field_indices(space(), entry_->reduction->pinned);
}

std::vector<std::size_t> Model::governing_components() const {
  if (!entry_->reduction) return evolved_fields();
  return field_indices(space(), entry_->reduction->governing);
}

SimConfig Model::default_sim(double u_min) const {
  const SimDefaults& d = entry_->sim;
  SimConfig cfg;
  cfg.grid = Grid::box(d.points, d.lower, d.upper, d.boundary);
  cfg.t_end = d.t_end;
  set_initial(cfg, d.initial, space().parameters());
  if (!d.z_profile.empty()) cfg.z_profile = SpaceTimeFunction::parse(d.z_profile, cfg.grid.dims(), space().parameters());
  for (const auto& [name, bound] : entry_->lower_bounds) cfg.lower_bounds[name] = std::max(bound, u_min);
  return cfg;
}

Trajectory Model::lift(const Trajectory& fields) const {
  if (space().adapted() && !entry_->reduction)
    throw std::invalid_argument("model '" + entry_->id + "' declares no consistent reduction to lift through");
  LiftOptions opt;
  if (!entry_->sim.z_profile.empty())
    opt.z_profile = SpaceTimeFunction::parse(entry_->sim.z_profile, fields.grid().dims(), space().parameters());
  return kcontact::lift(fields, *system_, opt);
}

SecondOrderPDE Model::reconstructed(const InversionOptions& options) const {
  SecondOrderPDE pde = reconstruct_second_order(*system_, options);
  if (space().adapted() && entry_->reduction)
    pde = pde.with_reduction(evolved_fields(), pinned_fields(), governing_components());
  return pde;
}

// ---------------------------------------------------------------------------

namespace {
double field_lower_bound(const Model& m, std::size_t field) {
  auto it = m.entry().lower_bounds.find(m.space().field_names()[field]);
  return it == m.entry().lower_bounds.end() ? -HUGE_VAL : it->second;
}
}  // namespace

std::vector<std::vector<double>> sample_points(const Model& model, std::size_t count, std::uint64_t seed) {
  const PhaseSpace& sp = model.space();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.2, 1.5);
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> pt = sp.make_point();
    for (std::size_t c = 0; c < sp.coordinate_count(); ++c) pt[c] = unit(rng);
    for (std::size_t i = 0; i < sp.n(); ++i) {
      double lo = field_lower_bound(model, i);
      if (std::isfinite(lo)) pt[sp.field(i)] = lo + pos(rng);
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<Jet> sample_jets(const Model& model, std::size_t count, std::uint64_t seed) {
  const PhaseSpace& sp = model.space();
  const std::size_t n = sp.n(), k = sp.k();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.2, 1.5);
  auto pinned = model.pinned_fields();
  std::vector<Jet> out;
  for (std::size_t s = 0; s < count; ++s) {
    Jet j(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      double lo = field_lower_bound(model, i);
      j.u[i] = std::isfinite(lo) ? lo + pos(rng) : unit(rng);
      for (std::size_t a = 0; a < k; ++a) {
        j.d(i, a) = unit(rng);
        for (std::size_t b = a; b < k; ++b) j.set_dd(i, a, b, unit(rng));
      }
    }
    for (double& v : j.z) v = unit(rng);
    for (double& v : j.dz) v = unit(rng);
    for (std::size_t f : pinned) {
      j.u[f] = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        j.d(f, a) = 0.0;
        for (std::size_t b = 0; b < k; ++b) j.dd(f, a, b) = 0.0;
      }
    }
    out.push_back(std::move(j));
  }
  return out;
}

TargetAgreement compare_with_target(const Model& model, std::span<const Jet> jets) {
  SecondOrderPDE rec = model.reconstructed();
  SecondOrderPDE target = model.target_pde();
  const double scale = model.target_scale();
  const PhaseSpace& sp = model.space();
  auto gov = model.governing_components();

  // Target fields as indices into the space's base fields.
  std::vector<std::size_t> tf;
  for (const auto& name : target.fields()) {
    auto it = std::find(sp.field_names().begin(), sp.field_names().end(), name);
    if (it == sp.field_names().end()) throw std::invalid_argument("target field '" + name + "' is not a base field");
    tf.push_back(static_cast<std::size_t>(it - sp.field_names().begin()));
  }
  if (gov.size() != tf.size()) throw std::logic_error("target and governing components differ in number");

  TargetAgreement res;
  std::vector<double> r(rec.component_count()), t(target.component_count());
  for (const Jet& j : jets) {
    Jet tj(tf.size(), j.k);
    for (std::size_t e = 0; e < tf.size(); ++e) {
      tj.u[e] = j.u[tf[e]];
      for (std::size_t a = 0; a < j.k; ++a) {
        tj.d(e, a) = j.d(tf[e], a);
        for (std::size_t b = 0; b < j.k; ++b) tj.dd(e, a, b) = j.dd(tf[e], a, b);
      }
    }
    tj.z = j.z;
    tj.dz = j.dz;
    rec.evaluate(j, r);
    target.evaluate(tj, t);
    for (std::size_t e = 0; e < tf.size(); ++e) {
      res.max_abs_difference = std::max(res.max_abs_difference, std::fabs(r[gov[e]] - scale * t[e]));
      res.max_abs_target = std::max(res.max_abs_target, std::fabs(t[e]));
    }
    ++res.samples;
  }
  return res;
}

}  // namespace kcontact
