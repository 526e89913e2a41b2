#include "kcontact/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "kcontact/stencil.hpp"

namespace kcontact {

namespace {

constexpr double kPi = 3.14159265358979323846;

void node_position(const Grid& g, std::size_t flat, std::vector<double>& x) {
  x.resize(g.dims());
  for (std::size_t a = 0; a < g.dims(); ++a) x[a] = g.coordinate(a, g.axis_index(flat, a));
}

bool wall_node(const Grid& g, std::size_t flat) {
  return g.boundary == Boundary::Dirichlet && g.on_boundary(flat);
}

double inverse_dx2(const Grid& g) {
  double s = 0.0;
  for (std::size_t a = 0; a < g.dims(); ++a) s += 1.0 / (g.spacing(a) * g.spacing(a));
  return s;
}

struct StepPlan {
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t save_every = 1;
};

StepPlan plan_steps(const SimConfig& cfg, double dt_max, const std::string& bound_name) {
  if (!(cfg.t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  StepPlan p;
  if (cfg.dt > 0.0) {
    if (cfg.dt > dt_max * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << std::setprecision(6) << "time step " << cfg.dt << " exceeds the " << bound_name << " limit " << dt_max;
      throw StabilityError(os.str());
    }
    p.steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  } else {
    if (!std::isfinite(dt_max))
      throw StabilityError("the scheme has no " + bound_name + " limit here; set dt explicitly");
    p.steps = static_cast<std::size_t>(std::ceil(cfg.t_end / dt_max - 1e-9));
  }
  p.steps = std::max<std::size_t>(p.steps, 1);
  p.dt = cfg.t_end / static_cast<double>(p.steps);
  p.save_every = cfg.save_every ? cfg.save_every : std::max<std::size_t>(1, p.steps / 200);
  return p;
}

double field_max(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m = std::max(m, std::fabs(x));
  }
  return m;
}

void check_growth(std::span<const double> v, double initial, const SimConfig& cfg, double t) {
  double m = field_max(v);
  if (!(m <= cfg.blowup_factor * std::max(initial, 1.0))) {
    std::ostringstream os;
    os << std::setprecision(6) << "solution blew up at t = " << t << " (max |field| = " << m << ")";
    throw InstabilityError(os.str(), t);
  }
}

// Fills channel `name` from the initial-data map; returns false if absent.
bool sample_initial(const SimConfig& cfg, const std::string& key, const Grid& g, std::span<double> out) {
  auto it = cfg.initial.find(key);
  if (it == cfg.initial.end() || !it->second) return false;
  std::vector<double> x;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    node_position(g, flat, x);
    out[flat] = it->second(0.0, x);
  }
  return true;
}

void check_lower_bounds(const SimConfig& cfg, const FieldState& s) {
  for (const auto& [name, bound] : cfg.lower_bounds) {
    if (!s.has_channel(name)) continue;
    auto v = s.channel(name);
    double lo = *std::min_element(v.begin(), v.end());
    if (lo < bound) {
      std::ostringstream os;
      os << std::setprecision(6) << "initial data for '" << name << "' reaches " << lo << ", below u_min = " << bound
         << "; the model is only defined where " << name << " > 0";
      throw DomainRestrictionError(os.str());
    }
  }
}

void fill_profile(const SpaceTimeFunction& f, const Grid& g, double t, std::span<double> out) {
  std::vector<double> x;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    node_position(g, flat, x);
    out[flat] = f(t, x);
  }
}

void profile_rate(const SpaceTimeFunction& f, const Grid& g, double t, std::vector<double>& out) {
  std::vector<double> x, grad(g.dims() + 1);
  out.resize(g.size());
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    node_position(g, flat, x);
    f.gradient(t, x, grad);
    out[flat] = grad[0];
  }
}

// Right-hand side of the dissipative balance at a gathered point.
double dissipative_source(const HdDWSystem& sys, std::span<const double> point, std::span<const double> yt,
                          std::span<const double> yx, PointWorkspace& ws) {
  const PhaseSpace& sp = sys.space();
  const DualValue& d = sys.gradient(point, ws);
  double v = -d.value;
  if (!sp.adapted()) {
    for (std::size_t c : sp.momentum_block()) v += point[c] * d.gradient[c];
    return v;
  }
  for (std::size_t i = 0; i < sp.n(); ++i) {
    v += sys.theta_value(i, point, ws) * yt[i];
    v += point[sp.momentum(i, 1)] * yx[i];
  }
  return v;
}

std::vector<std::size_t> spatial_momenta(const PhaseSpace& sp) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sp.n(); ++i)
    for (std::size_t a = 1; a < sp.k(); ++a) out.push_back(sp.momentum(i, a));
  return out;
}

// Solves dh/dp_i^a = d_a q^i (a spatial) at every node of `s`, in place.
void slave_spatial_momenta(const HdDWSystem& sys, const MomentumSolver& solver, FieldState& s, Parity up,
                           PointWorkspace& ws) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = s.grid();
  const std::size_t d = g.dims();
  PointGather gather(sp, s);
  std::vector<double> point, target(sp.n() * d);
  const auto& unknowns = solver.unknowns();
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    gather.gather(s, flat, point);
    for (std::size_t i = 0; i < sp.n(); ++i)
      for (std::size_t a = 0; a < d; ++a) target[i * d + a] = d1_at(g, s.channel(sp.field(i)), flat, a, up);
    solver.solve(point, target, ws);
    for (std::size_t c : unknowns) s.channel(c)[flat] = point[c];
  }
}

}  // namespace

// ---------------------------------------------------------------------------

SpaceTimeFunction::SpaceTimeFunction(Fn f, GradFn grad) : f_(std::move(f)), grad_(std::move(grad)) {}

SpaceTimeFunction SpaceTimeFunction::constant(double c) {
  SpaceTimeFunction f([c](double, std::span<const double>) { return c; },
                      [](double, std::span<const double>, std::span<double> out) {
                        std::fill(out.begin(), out.end(), 0.0);
                      });
  std::ostringstream os;
  os << std::setprecision(17) << c;
  f.text_ = os.str();
  return f;
}

std::vector<std::string> spatial_names(std::size_t dims) {
  if (dims == 1) return {"x"};
  std::vector<std::string> out;
  for (std::size_t a = 1; a <= dims; ++a) out.push_back("x" + std::to_string(a));
  return out;
}

SpaceTimeFunction SpaceTimeFunction::parse(std::string_view text, std::size_t dims,
                                           const std::vector<Parameter>& params) {
  Vocabulary v;
  v.add("t");
  for (auto& n : spatial_names(dims)) v.add(n);
  v.add("pi");
  std::vector<double> base(dims + 2, 0.0);
  base[dims + 1] = kPi;
  for (const auto& p : params) {
    if (v.contains(p.name)) continue;
    v.add(p.name);
    base.push_back(p.value);
  }
  auto tape = std::make_shared<const CompiledExpr>(kcontact::parse(text, v));
  auto value = [tape, base, dims](double t, std::span<const double> x) {
    thread_local EvalWorkspace ws;
    thread_local std::vector<double> pt;
    pt = base;
    pt[0] = t;
    for (std::size_t a = 0; a < dims; ++a) pt[1 + a] = x[a];
    return tape->value(pt, ws);
  };
  auto grad = [tape, base, dims](double t, std::span<const double> x, std::span<double> out) {
    thread_local EvalWorkspace ws;
    thread_local DualValue dv;
    thread_local std::vector<double> pt;
    pt = base;
    pt[0] = t;
    for (std::size_t a = 0; a < dims; ++a) pt[1 + a] = x[a];
    std::vector<std::size_t> wrt(dims + 1);
    std::iota(wrt.begin(), wrt.end(), 0);
    tape->derive(pt, wrt, 1, ws, dv);
    for (std::size_t a = 0; a <= dims; ++a) out[a] = dv.gradient[a];
  };
  SpaceTimeFunction f(value, grad);
  f.text_ = std::string(text);
  return f;
}

void SpaceTimeFunction::gradient(double t, std::span<const double> x, std::span<double> out) const {
  if (grad_) {
    grad_(t, x, out);
    return;
  }
  const double h = 1e-5;
  out[0] = (f_(t + h, x) - f_(t - h, x)) / (2.0 * h);
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t a = 0; a < x.size(); ++a) {
    xp[a] = x[a] + h;
    double fp = f_(t, xp);
    xp[a] = x[a] - h;
    double fm = f_(t, xp);
    xp[a] = x[a];
    out[1 + a] = (fp - fm) / (2.0 * h);
  }
}

void set_initial(SimConfig& cfg, const std::map<std::string, std::string>& text,
                 const std::vector<Parameter>& params) {
  for (const auto& [name, body] : text) cfg.initial[name] = SpaceTimeFunction::parse(body, cfg.grid.dims(), params);
}

// ---------------------------------------------------------------------------
// Stability bounds

namespace {

// Builds the t = 0 section used for the stability estimate and as the
// starting state of run_hddw.
FieldState initial_section(const HdDWSystem& sys, const SimConfig& cfg, std::vector<double>* field_rates) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = cfg.grid;
  if (g.dims() + 1 != sp.k()) throw std::invalid_argument("grid dimension does not match the phase space");
  FieldState s(g, sp.coordinate_names(), 0.0);
  for (std::size_t i = 0; i < sp.n(); ++i) sample_initial(cfg, sp.field_names()[i], g, s.channel(sp.field(i)));
  const std::string zt = sp.coordinate_name(sp.z(0));
  if (cfg.z_profile)
    fill_profile(cfg.z_profile, g, 0.0, s.channel(sp.z(0)));
  else
    sample_initial(cfg, zt, g, s.channel(sp.z(0)));
  check_lower_bounds(cfg, s);
  const Parity up = natural_parity(g.boundary);
  PointWorkspace ws;
  if (sp.adapted()) {
    MomentumSolver solver(sys, sp.momentum_block(), cfg.inversion);
    slave_spatial_momenta(sys, solver, s, up, ws);
    return s;
  }
  // Canonical: invert the whole momentum block against (q_t, grad q).
  const std::size_t n = sp.n(), k = sp.k(), N = g.size();
  std::vector<double> rates(n * N, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    sample_initial(cfg, sp.field_names()[i] + "_t", g, std::span<double>(rates).subspan(i * N, N));
  MomentumSolver solver(sys, sp.momentum_block(), cfg.inversion);
  PointGather gather(sp, s);
  std::vector<double> point, target(n * k);
  for (std::size_t flat = 0; flat < N; ++flat) {
    gather.gather(s, flat, point);
    for (std::size_t i = 0; i < n; ++i) {
      target[i * k] = rates[i * N + flat];
      for (std::size_t a = 1; a < k; ++a) target[i * k + a] = d1_at(g, s.channel(sp.field(i)), flat, a - 1, up);
    }
    for (std::size_t i = 0; i < n * k; ++i) point[sp.momentum_block()[i]] = target[i];
    solver.solve(point, target, ws);
    for (std::size_t c : sp.momentum_block()) s.channel(c)[flat] = point[c];
  }
  if (field_rates) *field_rates = std::move(rates);
  return s;
}

double hyperbolic_dt(const HdDWSystem& sys, const FieldState& s, const SimConfig& cfg) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = s.grid();
  const std::size_t d = g.dims();
  std::vector<double> c2(d, 0.0);
  PointGather gather(sp, s);
  PointWorkspace ws;
  std::vector<double> point;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    gather.gather(s, flat, point);
    const DualValue& h = sys.hessian(point, ws);
    for (std::size_t i = 0; i < sp.n(); ++i) {
      std::size_t pt = sp.momentum(i, 0);
      double htt = h.dd(pt, pt);
      for (std::size_t a = 0; a < d; ++a) {
        std::size_t px = sp.momentum(i, a + 1);
        double hxx = h.dd(px, px);
        double v = (hxx == 0.0) ? -1.0 : -htt / hxx;
        if (!(v > 0.0))
          throw StabilityError("the equation is not hyperbolic in t along axis " + sp.independent_names()[a + 1] +
                               " (dh/dp dp has no Lorentzian sign pattern); the leapfrog scheme needs a wave equation");
        c2[a] = std::max(c2[a], v);
      }
    }
  }
  double s2 = 0.0;
  for (std::size_t a = 0; a < d; ++a) s2 += c2[a] / (g.spacing(a) * g.spacing(a));
  return cfg.cfl / std::sqrt(s2);
}

// Spectral radius of Omega^{-T} H_pipi^{-1} over the initial data.
double adapted_diffusivity(const HdDWSystem& sys, const FieldState& s) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = s.grid();
  const long n = static_cast<long>(sp.n());
  PointGather gather(sp, s);
  PointWorkspace ws;
  std::vector<double> point;
  double rho = 0.0;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    gather.gather(s, flat, point);
    const DualValue& h = sys.hessian(point, ws);
    Eigen::MatrixXd hpp(n, n);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j)
        hpp(i, j) = h.dd(sp.momentum(static_cast<std::size_t>(i), 1), sp.momentum(static_cast<std::size_t>(j), 1));
    Eigen::MatrixXd om = sp.omega(point);
    Eigen::MatrixXd kmat = om.transpose().fullPivLu().solve(hpp.fullPivLu().inverse());
    if (!kmat.allFinite()) throw StabilityError("Omega or the fibre Hessian is singular on the initial data");
    rho = std::max(rho, kmat.eigenvalues().cwiseAbs().maxCoeff());
  }
  return rho;
}

// Jet of the spatial derivatives of `u` (nf x N) at a node; time slots untouched.
void spatial_jet(const Grid& g, std::span<const double> u, std::size_t nf, std::size_t flat, Parity up, Jet& j) {
  const std::size_t N = g.size(), d = g.dims();
  for (std::size_t i = 0; i < nf; ++i) {
    auto f = u.subspan(i * N, N);
    j.u[i] = f[flat];
    for (std::size_t a = 0; a < d; ++a) {
      j.d(i, a + 1) = d1_at(g, f, flat, a, up);
      for (std::size_t b = a; b < d; ++b) j.set_dd(i, a + 1, b + 1, d11_at(g, f, flat, a, b, up));
    }
  }
}

void profile_jet(const SpaceTimeFunction& zp, const Grid& g, double t, std::size_t flat, Jet& j) {
  std::fill(j.z.begin(), j.z.end(), 0.0);
  std::fill(j.dz.begin(), j.dz.end(), 0.0);
  if (!zp) return;
  thread_local std::vector<double> x, grad;
  node_position(g, flat, x);
  grad.resize(j.k);
  j.z[0] = zp(t, x);
  zp.gradient(t, x, grad);
  for (std::size_t b = 0; b < j.k; ++b) j.dz[b] = grad[b];
}

std::vector<double> initial_fields(const SecondOrderPDE& pde, const SimConfig& cfg, std::vector<double>* rates) {
  const Grid& g = cfg.grid;
  if (g.dims() + 1 != pde.k()) throw std::invalid_argument("grid dimension does not match the equation");
  const std::size_t nf = pde.fields().size(), N = g.size();
  std::vector<double> u(nf * N, 0.0);
  FieldState probe(g, pde.fields());
  for (std::size_t i = 0; i < nf; ++i) {
    bool pinned = std::find(pde.pinned().begin(), pde.pinned().end(), i) != pde.pinned().end();
    if (!pinned) sample_initial(cfg, pde.fields()[i], g, probe.channel(i));
    std::copy(probe.channel(i).begin(), probe.channel(i).end(), u.begin() + static_cast<long>(i * N));
  }
  check_lower_bounds(cfg, probe);
  if (rates) {
    rates->assign(nf * N, 0.0);
    for (std::size_t i = 0; i < nf; ++i)
      sample_initial(cfg, pde.fields()[i] + "_t", g, std::span<double>(*rates).subspan(i * N, N));
  }
  return u;
}

}  // namespace

double stable_dt(const HdDWSystem& sys, const SimConfig& cfg) {
  FieldState s = initial_section(sys, cfg, nullptr);
  if (!sys.space().adapted()) return hyperbolic_dt(sys, s, cfg);
  double rho = adapted_diffusivity(sys, s);
  if (rho == 0.0) return std::numeric_limits<double>::infinity();
  return cfg.diffusion_number / (rho * inverse_dx2(cfg.grid));
}

double stable_dt(const SecondOrderPDE& pde, const SimConfig& cfg) {
  const Grid& g = cfg.grid;
  const std::size_t nf = pde.fields().size(), k = pde.k(), d = g.dims(), N = g.size();
  std::vector<double> rates;
  std::vector<double> u = initial_fields(pde, cfg, &rates);
  const Parity up = natural_parity(g.boundary);
  Jet j(nf, k);
  std::vector<double> r0(pde.component_count()), r1(pde.component_count());
  if (pde.time_order() == 2) {
    std::vector<double> c2(d, 0.0);
    for (std::size_t flat = 0; flat < N; ++flat) {
      spatial_jet(g, u, nf, flat, up, j);
      profile_jet(cfg.z_profile, g, 0.0, flat, j);
      for (std::size_t i = 0; i < nf; ++i) j.d(i, 0) = rates[i * N + flat];
      for (std::size_t i = 0; i < nf; ++i) {
        pde.evaluate(j, r0);
        double save = j.dd(i, 0, 0);
        j.dd(i, 0, 0) = save + 1.0;
        pde.evaluate(j, r1);
        j.dd(i, 0, 0) = save;
        double rtt = r1[i] - r0[i];
        for (std::size_t a = 1; a <= d; ++a) {
          double sx = j.dd(i, a, a);
          j.dd(i, a, a) = sx + 1.0;
          pde.evaluate(j, r1);
          j.dd(i, a, a) = sx;
          double rxx = r1[i] - r0[i];
          double v = (rtt == 0.0) ? -1.0 : -rxx / rtt;
          if (!(v > 0.0)) throw StabilityError("the equation is not hyperbolic in t; the leapfrog scheme needs a wave equation");
          c2[a - 1] = std::max(c2[a - 1], v);
        }
      }
    }
    double s2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) s2 += c2[a] / (g.spacing(a) * g.spacing(a));
    return cfg.cfl / std::sqrt(s2);
  }
  const auto& ev = pde.evolved();
  const auto& comp = pde.components();
  const long ne = static_cast<long>(ev.size());
  Eigen::MatrixXd m, dxx(ne, ne);
  double rho = 0.0;
  for (std::size_t flat = 0; flat < N; ++flat) {
    spatial_jet(g, u, nf, flat, up, j);
    profile_jet(cfg.z_profile, g, 0.0, flat, j);
    pde.time_matrix(j, m);
    pde.evaluate(j, r0);
    for (std::size_t a = 1; a <= d; ++a) {
      for (long e = 0; e < ne; ++e) {
        std::size_t f = ev[static_cast<std::size_t>(e)];
        double sx = j.dd(f, a, a);
        j.dd(f, a, a) = sx + 1.0;
        pde.evaluate(j, r1);
        j.dd(f, a, a) = sx;
        for (long c = 0; c < ne; ++c) dxx(c, e) = -(r1[comp[static_cast<std::size_t>(c)]] - r0[comp[static_cast<std::size_t>(c)]]);
      }
      Eigen::MatrixXd kmat = m.fullPivLu().solve(dxx);
      if (!kmat.allFinite()) throw StabilityError("time coefficient matrix is singular on the initial data");
      double r = kmat.eigenvalues().cwiseAbs().maxCoeff();
      rho = std::max(rho, r);
    }
  }
  if (rho == 0.0) return std::numeric_limits<double>::infinity();
  return cfg.diffusion_number / (rho * inverse_dx2(g));
}

// ---------------------------------------------------------------------------
// z^x by quadrature

void reconstruct_zx(const HdDWSystem& sys, Trajectory& traj, const std::vector<std::vector<double>>& zt_rate,
                    const std::vector<std::vector<double>>* yt) {
  if (traj.empty()) return;
  const PhaseSpace& sp = sys.space();
  const Grid& g = traj.grid();
  const std::size_t n = sp.n(), N = g.size(), S = traj.size();
  if (zt_rate.size() != S) throw std::invalid_argument("one z^t rate per snapshot is required");
  const Parity up = natural_parity(g.boundary);
  const std::size_t zx = sp.z(1);
  const double dx = g.spacing(0);
  const std::size_t stride = g.stride(0), n0 = g.points[0];

  // Field time derivatives for adapted spaces, by finite differences if not given.
  std::vector<std::vector<double>> own_yt;
  if (sp.adapted() && !yt) {
    own_yt.assign(S, std::vector<double>(n * N, 0.0));
    const double dt = S > 1 ? traj.save_interval() : 1.0;
    for (std::size_t s = 0; s < S && S > 2; ++s)
      for (std::size_t i = 0; i < n; ++i) {
        auto c = [&](std::size_t k) { return traj[k].channel(sp.field(i)); };
        for (std::size_t flat = 0; flat < N; ++flat) {
          double v;
          if (s == 0)
            v = (-3.0 * c(0)[flat] + 4.0 * c(1)[flat] - c(2)[flat]) / (2.0 * dt);
          else if (s + 1 == S)
            v = (3.0 * c(S - 1)[flat] - 4.0 * c(S - 2)[flat] + c(S - 3)[flat]) / (2.0 * dt);
          else
            v = (c(s + 1)[flat] - c(s - 1)[flat]) / (2.0 * dt);
          own_yt[s][i * N + flat] = v;
        }
      }
    yt = &own_yt;
  }

  PointWorkspace ws;
  std::vector<double> point, ytn(n), yxn(n);
  for (std::size_t s = 0; s < S; ++s) {
    FieldState& st = traj[s];
    for (std::size_t a = 2; a < sp.k(); ++a) {
      auto c = st.channel(sp.z(a));
      std::fill(c.begin(), c.end(), 0.0);
    }
    auto zxc = st.channel(zx);
    std::fill(zxc.begin(), zxc.end(), 0.0);
    PointGather gather(sp, st);
    // d_x z^x at a node as a function of z^x there.
    auto slope = [&](std::size_t flat, double w) {
      gather.gather(st, flat, point);
      point[zx] = w;
      if (sp.adapted())
        for (std::size_t i = 0; i < n; ++i) {
          ytn[i] = (*yt)[s][i * N + flat];
          yxn[i] = d1_at(g, st.channel(sp.field(i)), flat, 0, up);
        }
      return dissipative_source(sys, point, ytn, yxn, ws) - zt_rate[s][flat];
    };
    for (std::size_t flat0 = 0; flat0 < N; ++flat0) {
      if (g.axis_index(flat0, 0) != 0) continue;
      double w = 0.0;
      double gprev = slope(flat0, 0.0);
      for (std::size_t i = 1; i < n0; ++i) {
        std::size_t flat = flat0 + i * stride;
        // w_next = w + dx/2 (g_prev + g(w_next)); secant in w_next.
        auto resid = [&](double v) { return v - w - 0.5 * dx * (gprev + slope(flat, v)); };
        double a = w + dx * gprev, fa = resid(a);
        double b = a + 1e-3 * (1.0 + std::fabs(a)), fb = resid(b);
        double next = a;
        for (int it = 0; it < 50 && fa != 0.0; ++it) {
          if (fb == fa) break;
          double c = b - fb * (b - a) / (fb - fa);
          a = b;
          fa = fb;
          b = c;
          fb = resid(b);
          next = b;
          if (std::fabs(fb) <= 1e-15 * (1.0 + std::fabs(b))) break;
        }
        w = next;
        zxc[flat] = w;
        gprev = slope(flat, w);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// HdDW integrators

namespace {

Trajectory run_canonical(const HdDWSystem& sys, const SimConfig& cfg, RunInfo* info) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = cfg.grid;
  const std::size_t n = sp.n(), k = sp.k(), N = g.size();
  const Parity up = natural_parity(g.boundary), pp = flip(up);

  FieldState s = initial_section(sys, cfg, nullptr);
  const double dt_max = hyperbolic_dt(sys, s, cfg);
  const StepPlan plan = plan_steps(cfg, dt_max, "CFL");
  const double dt = plan.dt;

  MomentumSolver slave(sys, spatial_momenta(sp), cfg.inversion);
  PointWorkspace ws;
  std::vector<double> point;
  // When no d^2h/dp^t dp^a (a spatial) survives symbolically, the slaved
  // spatial momenta do not move while p^t is iterated within one kick.
  bool coupled = false;
  for (std::size_t i = 0; i < n && !coupled; ++i) {
    Expr dpt = derivative(sys.hamiltonian(), sp.momentum(i, 0));
    for (std::size_t j = 0; j < n && !coupled; ++j)
      for (std::size_t a = 1; a < k && !coupled; ++a)
        coupled = !derivative(dpt, sp.momentum(j, a)).is_constant(0.0);
  }

  std::vector<double> u0;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = s.channel(sp.field(i));
    u0.insert(u0.end(), c.begin(), c.end());
  }
  const double init_max = field_max(u0);

  // Balance rate of p^t at every node, with the current channels.
  std::vector<double> B(n * N);
  auto balance = [&]() {
    PointGather gather(sp, s);
    for (std::size_t flat = 0; flat < N; ++flat) {
      gather.gather(s, flat, point);
      const DualValue& d = sys.gradient(point, ws);
      for (std::size_t i = 0; i < n; ++i) {
        double v = -d.gradient[sp.field(i)];
        for (std::size_t a = 0; a < k; ++a) v -= point[sp.momentum(i, a)] * d.gradient[sp.z(a)];
        for (std::size_t a = 1; a < k; ++a) v -= d1_at(g, s.channel(sp.momentum(i, a)), flat, a - 1, pp);
        B[i * N + flat] = v;
      }
    }
  };
  auto source = [&](std::vector<double>& out) {
    PointGather gather(sp, s);
    out.resize(N);
    for (std::size_t flat = 0; flat < N; ++flat) {
      gather.gather(s, flat, point);
      out[flat] = dissipative_source(sys, point, {}, {}, ws);
    }
  };
  auto set_pt = [&](const std::vector<double>& P) {
    for (std::size_t i = 0; i < n; ++i) {
      auto c = s.channel(sp.momentum(i, 0));
      std::copy(P.begin() + static_cast<long>(i * N), P.begin() + static_cast<long>((i + 1) * N), c.begin());
    }
  };

  // P holds p^t at the half step behind the current time.
  std::vector<double> P(n * N), P0(n * N);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = s.channel(sp.momentum(i, 0));
    std::copy(c.begin(), c.end(), P0.begin() + static_cast<long>(i * N));
  }
  balance();
  for (std::size_t q = 0; q < n * N; ++q) P[q] = P0[q] - 0.5 * dt * B[q];

  Trajectory traj;
  std::vector<std::vector<double>> rates;
  std::vector<double> Pnew(n * N), Pavg(n * N), G, rate, zmid(N), u_next(n * N), u_cur(n * N);
  const bool ode = !cfg.z_profile;

  for (std::size_t step = 0; step <= plan.steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    // Kick: P^{n+1/2} = P^{n-1/2} + dt B(u^n, (P^{n-1/2} + P^{n+1/2}) / 2).
    Pnew = P;
    for (int it = 0; it < 50; ++it) {
      for (std::size_t q = 0; q < n * N; ++q) Pavg[q] = 0.5 * (P[q] + Pnew[q]);
      set_pt(Pavg);
      if (coupled || it == 0) slave_spatial_momenta(sys, slave, s, up, ws);
      balance();
      double diff = 0.0, scale = 1.0;
      for (std::size_t q = 0; q < n * N; ++q) {
        double v = P[q] + dt * B[q];
        diff = std::max(diff, std::fabs(v - Pnew[q]));
        scale = std::max(scale, std::fabs(v));
        Pnew[q] = v;
      }
      if (it > 0 && diff <= 1e-14 * scale) break;
      if (it == 49) throw SimulationError("damping iteration did not converge; reduce dt");
    }
    for (std::size_t q = 0; q < n * N; ++q) Pavg[q] = 0.5 * (P[q] + Pnew[q]);
    set_pt(Pavg);
    if (coupled) slave_spatial_momenta(sys, slave, s, up, ws);

    if (ode) source(G);
    if (step % plan.save_every == 0) {
      s.set_time(t);
      traj.snapshots.push_back(s);
      if (ode)
        rates.push_back(G);
      else {
        profile_rate(cfg.z_profile, g, t, rate);
        rates.push_back(rate);
      }
    }
    if (step == plan.steps) break;

    // Drift: q^{n+1} = q^n + dt dh/dp^t at (q^n, P^{n+1/2}).
    {
      PointGather gather(sp, s);
      for (std::size_t flat = 0; flat < N; ++flat) {
        gather.gather(s, flat, point);
        for (std::size_t i = 0; i < n; ++i) point[sp.momentum(i, 0)] = Pnew[i * N + flat];
        const DualValue& d = sys.gradient(point, ws);
        for (std::size_t i = 0; i < n; ++i) {
          double u = s.channel(sp.field(i))[flat];
          u_cur[i * N + flat] = u;
          u_next[i * N + flat] = wall_node(g, flat) ? u : u + dt * d.gradient[sp.momentum(i, 0)];
        }
      }
    }
    // z^t: prescribed, or midpoint rule on its balance law.
    auto zc = s.channel(sp.z(0));
    if (ode) {
      std::vector<double> z0(zc.begin(), zc.end());
      for (std::size_t flat = 0; flat < N; ++flat) zmid[flat] = z0[flat] + 0.5 * dt * G[flat];
      for (std::size_t i = 0; i < n; ++i) {
        auto c = s.channel(sp.field(i));
        for (std::size_t flat = 0; flat < N; ++flat) c[flat] = 0.5 * (u_cur[i * N + flat] + u_next[i * N + flat]);
      }
      set_pt(Pnew);
      std::copy(zmid.begin(), zmid.end(), zc.begin());
      slave_spatial_momenta(sys, slave, s, up, ws);
      source(G);
      for (std::size_t flat = 0; flat < N; ++flat) zc[flat] = z0[flat] + dt * G[flat];
    } else {
      fill_profile(cfg.z_profile, g, t + dt, zc);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto c = s.channel(sp.field(i));
      std::copy(u_next.begin() + static_cast<long>(i * N), u_next.begin() + static_cast<long>((i + 1) * N), c.begin());
    }
    check_growth(u_next, init_max, cfg, t + dt);
    P = Pnew;
  }

  reconstruct_zx(sys, traj, rates, nullptr);
  if (info) {
    info->scheme = "staggered leapfrog (q, p^t), Crank-Nicolson damping, centered differences";
    info->dt = dt;
    info->steps = plan.steps;
    info->save_every = plan.save_every;
    info->stability_number = cfg.cfl * dt / dt_max;
  }
  return traj;
}

Trajectory run_adapted(const HdDWSystem& sys, const SimConfig& cfg, RunInfo* info) {
  const PhaseSpace& sp = sys.space();
  const Grid& g = cfg.grid;
  const std::size_t n = sp.n(), N = g.size();
  const Parity up = natural_parity(g.boundary), pp = flip(up);

  FieldState s = initial_section(sys, cfg, nullptr);
  double rho = adapted_diffusivity(sys, s);
  const double dt_max = rho == 0.0 ? std::numeric_limits<double>::infinity()
                                   : cfg.diffusion_number / (rho * inverse_dx2(g));
  const StepPlan plan = plan_steps(cfg, dt_max, "diffusion-number");
  const double dt = plan.dt;
  const bool ode = !cfg.z_profile;

  MomentumSolver slave(sys, sp.momentum_block(), cfg.inversion);
  PointWorkspace ws;
  std::vector<double> point;

  // State: base fields (n*N) then z^t (N) when it follows its balance law.
  const std::size_t dim = n * N + (ode ? N : 0);
  std::vector<double> y(dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = s.channel(sp.field(i));
    std::copy(c.begin(), c.end(), y.begin() + static_cast<long>(i * N));
  }
  if (ode) {
    auto c = s.channel(sp.z(0));
    std::copy(c.begin(), c.end(), y.begin() + static_cast<long>(n * N));
  }
  const double init_max = field_max(std::span<const double>(y).first(n * N));

  std::vector<double> yt_snapshot(n * N);
  Eigen::MatrixXd omt;
  Eigen::VectorXd b(static_cast<long>(n));
  auto rhs = [&](double t, const std::vector<double>& state, std::vector<double>& out) {
    out.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = s.channel(sp.field(i));
      std::copy(state.begin() + static_cast<long>(i * N), state.begin() + static_cast<long>((i + 1) * N), c.begin());
    }
    auto zc = s.channel(sp.z(0));
    if (ode)
      std::copy(state.begin() + static_cast<long>(n * N), state.end(), zc.begin());
    else
      fill_profile(cfg.z_profile, g, t, zc);
    auto zx = s.channel(sp.z(1));
    std::fill(zx.begin(), zx.end(), 0.0);
    slave_spatial_momenta(sys, slave, s, up, ws);
    PointGather gather(sp, s);
    std::vector<double> yt(n), yx(n);
    for (std::size_t flat = 0; flat < N; ++flat) {
      gather.gather(s, flat, point);
      for (std::size_t i = 0; i < n; ++i) yx[i] = d1_at(g, s.channel(sp.field(i)), flat, 0, up);
      if (wall_node(g, flat)) {
        std::fill(yt.begin(), yt.end(), 0.0);
      } else {
        const DualValue& d = sys.gradient(point, ws);
        const double hzt = d.gradient[sp.z(0)], hzx = d.gradient[sp.z(1)];
        for (std::size_t i = 0; i < n; ++i) {
          std::size_t pi = sp.momentum(i, 1);
          b(static_cast<long>(i)) = d1_at(g, s.channel(pi), flat, 0, pp) + d.gradient[sp.field(i)] +
                                    hzt * sys.theta_value(i, point, ws) + hzx * point[pi];
        }
        omt = sp.omega(point).transpose();
        Eigen::VectorXd v = omt.partialPivLu().solve(b);
        for (std::size_t i = 0; i < n; ++i) yt[i] = v(static_cast<long>(i));
      }
      for (std::size_t i = 0; i < n; ++i) out[i * N + flat] = yt[i];
      if (ode) out[n * N + flat] = dissipative_source(sys, point, yt, yx, ws);
    }
  };

  Trajectory traj;
  std::vector<std::vector<double>> rates, yts;
  std::vector<double> k1, k2, k3, k4, tmp(dim), rate;
  for (std::size_t step = 0; step <= plan.steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    rhs(t, y, k1);
    if (step % plan.save_every == 0) {
      s.set_time(t);
      traj.snapshots.push_back(s);
      if (ode)
        rates.emplace_back(k1.begin() + static_cast<long>(n * N), k1.end());
      else {
        profile_rate(cfg.z_profile, g, t, rate);
        rates.push_back(rate);
      }
      yts.emplace_back(k1.begin(), k1.begin() + static_cast<long>(n * N));
    }
    if (step == plan.steps) break;
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + 0.5 * dt * k1[q];
    rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + 0.5 * dt * k2[q];
    rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t q = 0; q < dim; ++q) tmp[q] = y[q] + dt * k3[q];
    rhs(t + dt, tmp, k4);
    for (std::size_t q = 0; q < dim; ++q) y[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    check_growth(std::span<const double>(y).first(n * N), init_max, cfg, t + dt);
  }

  reconstruct_zx(sys, traj, rates, &yts);
  if (info) {
    info->scheme = "RK4 in time, centered differences, fibre momenta slaved by inversion";
    info->dt = dt;
    info->steps = plan.steps;
    info->save_every = plan.save_every;
    info->stability_number = std::isfinite(dt_max) ? cfg.diffusion_number * dt / dt_max : 0.0;
  }
  return traj;
}

}  // namespace

Trajectory run_hddw(const HdDWSystem& sys, const SimConfig& cfg, RunInfo* info) {
  return sys.space().adapted() ? run_adapted(sys, cfg, info) : run_canonical(sys, cfg, info);
}

// ---------------------------------------------------------------------------
// Direct second-order integrator

namespace {

// Newton on the time slots of a jet: finds x with residual_c(jet(x)) = 0 for
// the components in `comp`, where slot(jet, i) is the i-th unknown.
template <class Slot>
void solve_slots(const SecondOrderPDE& pde, Jet& j, std::span<const std::size_t> comp, Slot slot,
                 std::vector<double>& r0, std::vector<double>& r1) {
  const long m = static_cast<long>(comp.size());
  Eigen::MatrixXd jac(m, m);
  Eigen::VectorXd f(m);
  for (int it = 0; it < 30; ++it) {
    pde.evaluate(j, r0);
    for (long c = 0; c < m; ++c) f(c) = r0[comp[static_cast<std::size_t>(c)]];
    for (long e = 0; e < m; ++e) {
      double& x = slot(j, static_cast<std::size_t>(e));
      double save = x, h = 1e-6 * std::max(1.0, std::fabs(save));
      x = save + h;
      pde.evaluate(j, r1);
      x = save;
      for (long c = 0; c < m; ++c) jac(c, e) = (r1[comp[static_cast<std::size_t>(c)]] - f(c)) / h;
    }
    Eigen::VectorXd step = jac.partialPivLu().solve(f);
    if (!step.allFinite()) throw SimulationError("implicit time step is singular");
    double smax = 0.0, xmax = 0.0;
    for (long e = 0; e < m; ++e) {
      double& x = slot(j, static_cast<std::size_t>(e));
      x -= step(e);
      smax = std::max(smax, std::fabs(step(e)));
      xmax = std::max(xmax, std::fabs(x));
    }
    if (smax <= 1e-13 * (1.0 + xmax)) return;
  }
  throw SimulationError("implicit time step did not converge");
}

Trajectory run_direct_first(const SecondOrderPDE& pde, const SimConfig& cfg, RunInfo* info) {
  const Grid& g = cfg.grid;
  const std::size_t nf = pde.fields().size(), k = pde.k(), N = g.size();
  const Parity up = natural_parity(g.boundary);
  std::vector<double> u = initial_fields(pde, cfg, nullptr);
  const double dt_max = stable_dt(pde, cfg);
  const StepPlan plan = plan_steps(cfg, dt_max, "diffusion-number");
  const double dt = plan.dt;
  const double init_max = field_max(u);
  const auto& ev = pde.evolved();
  const auto& comp = pde.components();
  const long ne = static_cast<long>(ev.size());

  Jet j(nf, k);
  std::vector<double> r0(pde.component_count());
  Eigen::MatrixXd m;
  Eigen::VectorXd f(ne);
  auto rhs = [&](double t, const std::vector<double>& state, std::vector<double>& out) {
    out.assign(nf * N, 0.0);
    for (std::size_t flat = 0; flat < N; ++flat) {
      if (wall_node(g, flat)) continue;
      spatial_jet(g, state, nf, flat, up, j);
      profile_jet(cfg.z_profile, g, t, flat, j);
      for (std::size_t i = 0; i < nf; ++i) {
        j.d(i, 0) = 0.0;
        for (std::size_t a = 0; a < k; ++a) j.set_dd(i, 0, a, 0.0);
      }
      pde.evaluate(j, r0);
      pde.time_matrix(j, m);
      for (long c = 0; c < ne; ++c) f(c) = -r0[comp[static_cast<std::size_t>(c)]];
      Eigen::VectorXd v = m.partialPivLu().solve(f);
      for (long e = 0; e < ne; ++e) out[ev[static_cast<std::size_t>(e)] * N + flat] = v(e);
    }
  };

  Trajectory traj;
  FieldState snap(g, pde.fields());
  std::vector<double> k1, k2, k3, k4, tmp(u.size());
  for (std::size_t step = 0; step <= plan.steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    if (step % plan.save_every == 0) {
      for (std::size_t i = 0; i < nf; ++i)
        std::copy(u.begin() + static_cast<long>(i * N), u.begin() + static_cast<long>((i + 1) * N),
                  snap.channel(i).begin());
      snap.set_time(t);
      traj.snapshots.push_back(snap);
    }
    if (step == plan.steps) break;
    rhs(t, u, k1);
    for (std::size_t q = 0; q < u.size(); ++q) tmp[q] = u[q] + 0.5 * dt * k1[q];
    rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t q = 0; q < u.size(); ++q) tmp[q] = u[q] + 0.5 * dt * k2[q];
    rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t q = 0; q < u.size(); ++q) tmp[q] = u[q] + dt * k3[q];
    rhs(t + dt, tmp, k4);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    check_growth(u, init_max, cfg, t + dt);
  }
  if (info) {
    info->scheme = "RK4 in time, compact centered differences";
    info->dt = dt;
    info->steps = plan.steps;
    info->save_every = plan.save_every;
    info->stability_number = std::isfinite(dt_max) ? cfg.diffusion_number * dt / dt_max : 0.0;
  }
  return traj;
}

Trajectory run_direct_second(const SecondOrderPDE& pde, const SimConfig& cfg, RunInfo* info) {
  const Grid& g = cfg.grid;
  const std::size_t nf = pde.fields().size(), k = pde.k(), d = g.dims(), N = g.size();
  const Parity up = natural_parity(g.boundary);
  std::vector<double> v0;
  std::vector<double> u = initial_fields(pde, cfg, &v0);
  const double dt_max = stable_dt(pde, cfg);
  const StepPlan plan = plan_steps(cfg, dt_max, "CFL");
  const double dt = plan.dt;
  const double init_max = field_max(u);

  std::vector<std::size_t> comp(nf);
  std::iota(comp.begin(), comp.end(), 0);
  Jet j(nf, k);
  std::vector<double> r0(pde.component_count()), r1(pde.component_count());

  // u^1 from the Taylor expansion with u_tt solved from the equation.
  std::vector<double> prev = u, cur(nf * N), next(nf * N);
  for (std::size_t flat = 0; flat < N; ++flat) {
    spatial_jet(g, u, nf, flat, up, j);
    profile_jet(cfg.z_profile, g, 0.0, flat, j);
    for (std::size_t i = 0; i < nf; ++i) {
      j.d(i, 0) = v0[i * N + flat];
      for (std::size_t a = 0; a < d; ++a)
        j.set_dd(i, 0, a + 1, d1_at(g, std::span<const double>(v0).subspan(i * N, N), flat, a, up));
      j.dd(i, 0, 0) = 0.0;
    }
    if (!wall_node(g, flat)) solve_slots(pde, j, comp, [](Jet& jj, std::size_t i) -> double& { return jj.dd(i, 0, 0); }, r0, r1);
    for (std::size_t i = 0; i < nf; ++i) {
      double a0 = wall_node(g, flat) ? 0.0 : j.dd(i, 0, 0);
      double vt = wall_node(g, flat) ? 0.0 : v0[i * N + flat];
      cur[i * N + flat] = u[i * N + flat] + dt * vt + 0.5 * dt * dt * a0;
    }
  }

  Trajectory traj;
  FieldState snap(g, pde.fields());
  auto save = [&](const std::vector<double>& f, double t) {
    for (std::size_t i = 0; i < nf; ++i)
      std::copy(f.begin() + static_cast<long>(i * N), f.begin() + static_cast<long>((i + 1) * N),
                snap.channel(i).begin());
    snap.set_time(t);
    traj.snapshots.push_back(snap);
  };
  save(prev, 0.0);
  if (plan.save_every == 1) save(cur, dt);

  // Unknown is u^{n+1}: u_t and u_tt are centered, u_tx is lagged.
  std::vector<double> dxp(nf * N * d), dxc(nf * N * d);
  auto grads = [&](const std::vector<double>& f, std::vector<double>& out) {
    for (std::size_t i = 0; i < nf; ++i)
      for (std::size_t flat = 0; flat < N; ++flat)
        for (std::size_t a = 0; a < d; ++a)
          out[(i * N + flat) * d + a] = d1_at(g, std::span<const double>(f).subspan(i * N, N), flat, a, up);
  };
  grads(prev, dxp);
  for (std::size_t step = 1; step < plan.steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    grads(cur, dxc);
    for (std::size_t flat = 0; flat < N; ++flat) {
      if (wall_node(g, flat)) {
        for (std::size_t i = 0; i < nf; ++i) next[i * N + flat] = cur[i * N + flat];
        continue;
      }
      spatial_jet(g, cur, nf, flat, up, j);
      profile_jet(cfg.z_profile, g, t, flat, j);
      for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t a = 0; a < d; ++a)
          j.set_dd(i, 0, a + 1, (dxc[(i * N + flat) * d + a] - dxp[(i * N + flat) * d + a]) / dt);
      std::vector<double> w(nf);
      for (std::size_t i = 0; i < nf; ++i) w[i] = 2.0 * cur[i * N + flat] - prev[i * N + flat];
      auto load = [&]() {
        for (std::size_t i = 0; i < nf; ++i) {
          double um = prev[i * N + flat], uc = cur[i * N + flat];
          j.d(i, 0) = (w[i] - um) / (2.0 * dt);
          j.dd(i, 0, 0) = (w[i] - 2.0 * uc + um) / (dt * dt);
        }
      };
      // The residual is affine in (u_t, u_tt) for every supported equation;
      // Newton on w converges in one step, a second confirms.
      const long m = static_cast<long>(nf);
      Eigen::MatrixXd jac(m, m);
      Eigen::VectorXd f(m);
      bool done = false;
      for (int it = 0; it < 30 && !done; ++it) {
        load();
        pde.evaluate(j, r0);
        for (long c = 0; c < m; ++c) f(c) = r0[static_cast<std::size_t>(c)];
        for (long e = 0; e < m; ++e) {
          double save_w = w[static_cast<std::size_t>(e)], h = 1e-6 * std::max(1.0, std::fabs(save_w));
          w[static_cast<std::size_t>(e)] = save_w + h;
          load();
          pde.evaluate(j, r1);
          w[static_cast<std::size_t>(e)] = save_w;
          for (long c = 0; c < m; ++c) jac(c, e) = (r1[static_cast<std::size_t>(c)] - f(c)) / h;
        }
        Eigen::VectorXd stp = jac.partialPivLu().solve(f);
        if (!stp.allFinite()) throw SimulationError("implicit time step is singular");
        double smax = 0.0, wmax = 0.0;
        for (long e = 0; e < m; ++e) {
          w[static_cast<std::size_t>(e)] -= stp(e);
          smax = std::max(smax, std::fabs(stp(e)));
          wmax = std::max(wmax, std::fabs(w[static_cast<std::size_t>(e)]));
        }
        done = smax <= 1e-13 * (1.0 + wmax);
      }
      if (!done) throw SimulationError("implicit time step did not converge");
      for (std::size_t i = 0; i < nf; ++i) next[i * N + flat] = w[i];
    }
    check_growth(next, init_max, cfg, t + dt);
    prev.swap(cur);
    cur.swap(next);
    std::swap(dxp, dxc);
    if ((step + 1) % plan.save_every == 0) save(cur, t + dt);
  }
  if (info) {
    info->scheme = "three-level leapfrog, compact centered differences";
    info->dt = dt;
    info->steps = plan.steps;
    info->save_every = plan.save_every;
    info->stability_number = cfg.cfl * dt / dt_max;
  }
  return traj;
}

}  // namespace

Trajectory run_second_order(const SecondOrderPDE& pde, const SimConfig& cfg, RunInfo* info) {
  return pde.time_order() == 2 ? run_direct_second(pde, cfg, info) : run_direct_first(pde, cfg, info);
}

// ---------------------------------------------------------------------------

Trajectory lift(const Trajectory& fields, const HdDWSystem& sys, const LiftOptions& options) {
  if (fields.empty()) throw std::invalid_argument("cannot lift an empty trajectory");
  const PhaseSpace& sp = sys.space();
  const Grid& g = fields.grid();
  if (g.dims() + 1 != sp.k()) throw std::invalid_argument("grid dimension does not match the phase space");
  const std::size_t n = sp.n(), N = g.size(), S = fields.size();
  if (!sp.adapted() && S < 3) throw std::invalid_argument("lifting a canonical trajectory needs three snapshots");
  const Parity up = natural_parity(g.boundary);
  const double dt = S > 1 ? fields.save_interval() : 1.0;

  Trajectory out;
  for (std::size_t s = 0; s < S; ++s) {
    FieldState st(g, sp.coordinate_names(), fields[s].time());
    for (std::size_t i = 0; i < n; ++i)
      if (fields[s].has_channel(sp.field_names()[i])) {
        auto src = fields[s].channel(sp.field_names()[i]);
        std::copy(src.begin(), src.end(), st.channel(sp.field(i)).begin());
      }
    if (options.z_profile) fill_profile(options.z_profile, g, st.time(), st.channel(sp.z(0)));
    out.snapshots.push_back(std::move(st));
  }

  MomentumSolver solver(sys, sp.momentum_block(), options.inversion);
  PointWorkspace ws;
  std::vector<double> point;
  const std::size_t mpf = sp.momenta_per_field();
  std::vector<double> target(n * mpf);
  for (std::size_t s = 0; s < S; ++s) {
    FieldState& st = out[s];
    PointGather gather(sp, st);
    for (std::size_t flat = 0; flat < N; ++flat) {
      gather.gather(st, flat, point);
      for (std::size_t i = 0; i < n; ++i) {
        auto f = [&](std::size_t q) { return out[q].channel(sp.field(i))[flat]; };
        for (std::size_t m = 0; m < mpf; ++m) {
          std::size_t axis = sp.adapted() ? 1 : m;
          double v;
          if (axis == 0) {
            if (s == 0)
              v = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dt);
            else if (s + 1 == S)
              v = (3.0 * f(S - 1) - 4.0 * f(S - 2) + f(S - 3)) / (2.0 * dt);
            else
              v = (f(s + 1) - f(s - 1)) / (2.0 * dt);
          } else {
            v = d1_at(g, st.channel(sp.field(i)), flat, axis - 1, up);
          }
          target[i * mpf + m] = v;
          point[sp.momentum_block()[i * mpf + m]] = v;
        }
      }
      solver.solve(point, target, ws);
      for (std::size_t c : sp.momentum_block()) st.channel(c)[flat] = point[c];
    }
  }

  std::vector<std::vector<double>> rates(S, std::vector<double>(N, 0.0));
  if (options.z_profile)
    for (std::size_t s = 0; s < S; ++s) profile_rate(options.z_profile, g, out[s].time(), rates[s]);
  reconstruct_zx(sys, out, rates, nullptr);
  return out;
}

// ---------------------------------------------------------------------------

Grid refine(const Grid& g) {
  Grid r = g;
  for (auto& p : r.points) p = g.boundary == Boundary::Periodic ? 2 * p : 2 * p - 1;
  return r;
}

double fitted_order(std::span<const double> h, std::span<const double> err) {
  if (h.size() != err.size() || h.size() < 2) throw std::invalid_argument("need at least two (h, err) pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

CrossReport cross_validate(const HdDWSystem& sys, const SecondOrderPDE& pde, const SimConfig& cfg,
                           std::size_t levels) {
  if (levels < 2) throw std::invalid_argument("cross validation needs at least two levels");
  const bool hyperbolic = pde.time_order() == 2;
  if (hyperbolic == sys.space().adapted())
    throw std::invalid_argument("the HdDW system and the equation are of different time order");
  CrossReport rep;
  for (std::size_t e : pde.evolved()) rep.fields.push_back(pde.fields()[e]);

  double dt0 = cfg.dt;
  if (dt0 <= 0.0) dt0 = std::min(stable_dt(sys, cfg), stable_dt(pde, cfg));
  if (!std::isfinite(dt0)) throw StabilityError("no stability limit; set dt explicitly");
  std::size_t steps0 = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.t_end / dt0 - 1e-9)));
  std::size_t save0 = cfg.save_every ? cfg.save_every : std::max<std::size_t>(1, steps0 / 20);
  const std::size_t factor = hyperbolic ? 2 : 4;

  SimConfig c = cfg;
  std::vector<double> hs, errs;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0) {
      c.grid = refine(c.grid);
      steps0 *= factor;
      save0 *= factor;
    }
    c.dt = cfg.t_end / static_cast<double>(steps0);
    c.save_every = save0;
    auto t0 = std::chrono::steady_clock::now();
    Trajectory a = run_hddw(sys, c);
    Trajectory b = run_second_order(pde, c);
    auto t1 = std::chrono::steady_clock::now();
    if (a.size() != b.size()) throw SimulationError("the two runs saved different snapshot counts");
    double disc = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s)
      for (const auto& f : rep.fields) {
        auto x = a[s].channel(f), y = b[s].channel(f);
        for (std::size_t q = 0; q < x.size(); ++q) disc = std::max(disc, std::fabs(x[q] - y[q]));
      }
    CrossLevel lv;
    lv.points = c.grid.points[0];
    lv.dx = c.grid.spacing(0);
    lv.dt = c.dt;
    lv.discrepancy = disc;
    lv.seconds = std::chrono::duration<double>(t1 - t0).count();
    rep.levels.push_back(lv);
    hs.push_back(lv.dx);
    errs.push_back(disc);
  }
  rep.order = fitted_order(hs, errs);
  for (std::size_t l = 1; l < levels; ++l) rep.pairwise_orders.push_back(std::log(errs[l - 1] / errs[l]) / std::log(hs[l - 1] / hs[l]));
  return rep;
}

// ---------------------------------------------------------------------------
// CSV

void write_snapshot_csv(std::ostream& os, const FieldState& s) {
  const Grid& g = s.grid();
  auto names = spatial_names(g.dims());
  for (std::size_t a = 0; a < names.size(); ++a) os << (a ? "," : "") << names[a];
  for (const auto& c : s.channel_names()) os << ',' << c;
  os << '\n';
  auto old = os.precision(17);
  std::vector<double> x;
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    node_position(g, flat, x);
    for (std::size_t a = 0; a < x.size(); ++a) os << (a ? "," : "") << x[a];
    for (std::size_t c = 0; c < s.channel_count(); ++c) os << ',' << s.channel(c)[flat];
    os << '\n';
  }
  os.precision(old);
}

FieldState read_snapshot_csv(std::istream& is, const Grid& grid, double time) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty snapshot file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  const std::size_t d = grid.dims();
  if (cols.size() < d) throw std::runtime_error("snapshot header has too few columns");
  std::vector<std::string> channels(cols.begin() + static_cast<long>(d), cols.end());
  FieldState s(grid, channels, time);
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    if (!std::getline(is, line)) throw std::runtime_error("snapshot file has too few rows");
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("snapshot row has too few columns");
      if (c >= d) s.channel(c - d)[flat] = std::stod(cell);
    }
  }
  return s;
}

std::vector<std::string> write_trajectory_csv(const std::filesystem::path& dir, const Trajectory& traj) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(5) << std::setfill('0') << s << ".csv";
    std::ofstream f(dir / name.str());
    if (!f) throw std::runtime_error("cannot write " + (dir / name.str()).string());
    write_snapshot_csv(f, traj[s]);
    names.push_back(name.str());
  }
  return names;
}

}  // namespace kcontact
