#include "kcontact/regularity.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "kcontact/stencil.hpp"

namespace kcontact {

std::string InertiaSignature::to_string() const {
  std::ostringstream os;
  os << '(' << positive << ',' << negative << ',' << zero << ')';
  return os.str();
}

std::string_view pde_type_name(PDEType t) {
  switch (t) {
    case PDEType::Elliptic: return "elliptic";
    case PDEType::Hyperbolic: return "hyperbolic";
    case PDEType::Ultrahyperbolic: return "ultrahyperbolic";
    case PDEType::Degenerate: return "degenerate";
  }
  return "?";
}

std::string Classification::to_string() const {
  return "signature=" + signature.to_string() + " type=" + std::string(pde_type_name(type));
}

Classification classify_matrix(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("classification needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  double scale = ev.cwiseAbs().maxCoeff();
  Classification c;
  c.matrix = a;
  for (long i = 0; i < ev.size(); ++i) {
    if (scale == 0.0 || std::fabs(ev(i)) <= rel_tol * scale)
      ++c.signature.zero;
    else if (ev(i) > 0)
      ++c.signature.positive;
    else
      ++c.signature.negative;
  }
  const int k = static_cast<int>(a.rows());
  const auto& s = c.signature;
  if (s.zero > 0)
    c.type = PDEType::Degenerate;
  else if (s.positive == k || s.negative == k)
    c.type = PDEType::Elliptic;
  else if (s.positive == 1 || s.negative == 1)
    c.type = PDEType::Hyperbolic;
  else
    c.type = PDEType::Ultrahyperbolic;
  return c;
}

Eigen::MatrixXd momentum_hessian(const HdDWSystem& sys, std::span<const double> point) {
  std::vector<std::size_t> block = sys.space().momentum_block();
  EvalWorkspace ws;
  DualValue d;
  sys.tape().derive(point, block, 2, ws, d);
  const long m = static_cast<long>(block.size());
  Eigen::MatrixXd h(m, m);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < m; ++j) h(i, j) = d.dd(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return h;
}

Classification classify(const HdDWSystem& sys, std::span<const double> point) {
  const PhaseSpace& sp = sys.space();
  if (sp.adapted() || sp.n() != 1)
    throw std::invalid_argument("classification is defined for a single field on a canonical space");
  return classify_matrix(momentum_hessian(sys, point));
}

namespace {
// |det| relative to the size of the entries; 0 for the zero matrix.
double relative_det(const Eigen::MatrixXd& h, double* det_out = nullptr) {
  double det = h.rows() == 0 ? 1.0 : h.fullPivLu().determinant();
  if (det_out) *det_out = det;
  double amax = h.cwiseAbs().maxCoeff();
  if (amax == 0.0) return 0.0;
  return std::fabs(det) / std::pow(amax, static_cast<double>(h.rows()));
}
}  // namespace

RegularityReport check_regular(const HdDWSystem& sys, const std::vector<std::vector<double>>& samples,
                               const RegularityOptions& options) {
  RegularityReport rep;
  rep.samples = samples.size();
  rep.min_relative_det = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    double det = 0.0;
    double rel = relative_det(momentum_hessian(sys, samples[s]), &det);
    rep.determinants.push_back(det);
    rep.min_relative_det = std::min(rep.min_relative_det, rel);
    if (!(rel > options.relative_tolerance) && !rep.first_singular) {
      rep.first_singular = s;
      rep.regular = false;
    }
  }
  return rep;
}

double degeneracy_measure(const HdDWSystem& sys, std::span<const double> point) {
  Eigen::MatrixXd h = momentum_hessian(sys, point);
  double det = std::fabs(h.fullPivLu().determinant());
  if (det == 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(det, -1.0 / static_cast<double>(h.rows()));
}

// ---------------------------------------------------------------------------

MomentumSolver::MomentumSolver(const HdDWSystem& sys, std::vector<std::size_t> unknowns, InversionOptions options)
    : sys_(&sys), unknowns_(std::move(unknowns)), options_(options) {}

bool MomentumSolver::newton(std::vector<double>& point, std::span<const double> target, PointWorkspace& ws,
                            InversionResult& res) const {
  const long m = static_cast<long>(unknowns_.size());
  double tscale = 1.0;
  for (double t : target) tscale = std::max(tscale, std::fabs(t));
  Eigen::MatrixXd jac(m, m);
  Eigen::VectorXd f(m);
  for (int it = 0; it <= options_.max_iterations; ++it) {
    sys_->tape().derive(point, unknowns_, 2, ws.eval, ws.dual);
    const DualValue& d = ws.dual;
    double fmax = 0.0;
    for (long i = 0; i < m; ++i) {
      f(i) = d.gradient[static_cast<std::size_t>(i)] - target[static_cast<std::size_t>(i)];
      fmax = std::max(fmax, std::fabs(f(i)));
    }
    res.residual = fmax;
    if (!std::isfinite(fmax)) return false;
    if (fmax <= options_.tolerance * tscale) return true;
    if (it == options_.max_iterations) return false;
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < m; ++j) jac(i, j) = d.dd(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    if (!(relative_det(jac) > options_.regularity.relative_tolerance))
      throw SingularityError("momentum Hessian is singular", point);
    Eigen::VectorXd step = jac.partialPivLu().solve(f);
    for (long i = 0; i < m; ++i) point[unknowns_[static_cast<std::size_t>(i)]] -= step(i);
    ++res.iterations;
  }
  return false;
}

InversionResult MomentumSolver::solve(std::vector<double>& point, std::span<const double> target,
                                      PointWorkspace& ws) const {
  if (target.size() != unknowns_.size()) throw std::invalid_argument("target size does not match the unknowns");
  InversionResult res;
  std::vector<double> guess(unknowns_.size());
  for (std::size_t i = 0; i < unknowns_.size(); ++i) guess[i] = point[unknowns_[i]];
  try {
    if (newton(point, target, ws, res)) return res;
  } catch (const DomainError&) {
  } catch (const SingularityError&) {
  }
  for (std::size_t u : unknowns_) point[u] = 0.0;
  InversionResult retry;
  if (newton(point, target, ws, retry)) {
    retry.iterations += res.iterations;
    return retry;
  }
  for (std::size_t i = 0; i < unknowns_.size(); ++i) point[unknowns_[i]] = guess[i];
  std::ostringstream os;
  os << "momentum inversion did not converge (residual " << retry.residual << ")";
  throw NonConvergenceError(os.str());
}

InversionResult invert_momenta(const HdDWSystem& sys, std::vector<double>& point, std::span<const double> v,
                               const InversionOptions& options) {
  std::vector<std::size_t> block = sys.space().momentum_block();
  if (v.size() != block.size()) throw std::invalid_argument("velocity vector has the wrong size");
  for (std::size_t i = 0; i < block.size(); ++i) point[block[i]] = v[i];
  PointWorkspace ws;
  return MomentumSolver(sys, block, options).solve(point, v, ws);
}

// ---------------------------------------------------------------------------

Jet::Jet(std::size_t fields, std::size_t dims)
    : nf(fields), k(dims), u(fields), du(fields * dims), ddu(fields * dims * dims), z(dims), dz(dims * dims) {}

SecondOrderPDE::SecondOrderPDE(std::string description, std::vector<std::string> fields, std::size_t k,
                               int time_order, std::size_t components, Residual residual)
    : description_(std::move(description)),
      fields_(std::move(fields)),
      k_(k),
      time_order_(time_order),
      ncomp_(components),
      residual_(std::move(residual)) {
  if (time_order != 1 && time_order != 2) throw std::invalid_argument("time order must be 1 or 2");
  evolved_.resize(fields_.size());
  std::iota(evolved_.begin(), evolved_.end(), 0);
  components_ = evolved_;
}

SecondOrderPDE SecondOrderPDE::with_reduction(std::vector<std::size_t> evolved, std::vector<std::size_t> pinned,
                                              std::vector<std::size_t> components) const {
  if (evolved.size() != components.size())
    throw std::invalid_argument("each evolved field needs one governing component");
  for (std::size_t c : components)
    if (c >= ncomp_) throw std::out_of_range("component index out of range");
  for (std::size_t f : evolved)
    if (f >= fields_.size()) throw std::out_of_range("evolved field index out of range");
  for (std::size_t f : pinned)
    if (f >= fields_.size()) throw std::out_of_range("pinned field index out of range");
  SecondOrderPDE copy = *this;
  copy.evolved_ = std::move(evolved);
  copy.pinned_ = std::move(pinned);
  copy.components_ = std::move(components);
  return copy;
}

void SecondOrderPDE::time_matrix(const Jet& jet, Eigen::MatrixXd& m) const {
  const long ne = static_cast<long>(evolved_.size());
  m.resize(ne, ne);
  if (time_matrix_) {
    time_matrix_(jet, evolved_, components_, m);
    return;
  }
  // The residual is affine in the time derivatives: unit differences are exact.
  std::vector<double> r0(ncomp_), r1(ncomp_);
  Jet j = jet;
  evaluate(j, r0);
  for (long e = 0; e < ne; ++e) {
    std::size_t f = evolved_[static_cast<std::size_t>(e)];
    double save = j.d(f, 0);
    j.d(f, 0) = save + 1.0;
    evaluate(j, r1);
    j.d(f, 0) = save;
    for (long c = 0; c < ne; ++c) {
      std::size_t comp = components_[static_cast<std::size_t>(c)];
      m(c, e) = r1[comp] - r0[comp];
    }
  }
}

SecondOrderPDE SecondOrderPDE::scaled(double s) const {
  SecondOrderPDE copy = *this;
  Residual inner = residual_;
  copy.residual_ = [inner, s](const Jet& j, std::span<double> out) {
    inner(j, out);
    for (double& v : out) v *= s;
  };
  if (time_matrix_) {
    TimeMatrix tm = time_matrix_;
    copy.time_matrix_ = [tm, s](const Jet& j, std::span<const std::size_t> e, std::span<const std::size_t> c,
                                Eigen::MatrixXd& m) {
      tm(j, e, c, m);
      m *= s;
    };
  }
  return copy;
}

// ---------------------------------------------------------------------------

namespace {

struct ReconstructionState {
  HdDWSystem sys;
  InversionOptions options;
  std::vector<std::size_t> all;
  std::vector<double> base_point;
};

struct ReconstructionScratch {
  PointWorkspace ws;
  DualValue hess;
  std::vector<double> point, target;
  Eigen::MatrixXd hpp, rhs;
};

// Fills point/momenta for the jet and the full Hessian there.
void invert_for_jet(const ReconstructionState& st, const Jet& jet, ReconstructionScratch& sc) {
  const PhaseSpace& sp = st.sys.space();
  const std::size_t n = sp.n(), k = sp.k(), mpf = sp.momenta_per_field();
  sc.point = st.base_point;
  for (std::size_t i = 0; i < n; ++i) sc.point[sp.field(i)] = jet.u[i];
  for (std::size_t a = 0; a < k; ++a) sc.point[sp.z(a)] = jet.z[a];
  std::vector<std::size_t> block = sp.momentum_block();
  sc.target.resize(block.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < mpf; ++m) {
      std::size_t axis = sp.adapted() ? 1 : m;
      sc.target[i * mpf + m] = jet.d(i, axis);
      sc.point[block[i * mpf + m]] = jet.d(i, axis);
    }
  MomentumSolver(st.sys, block, st.options).solve(sc.point, sc.target, sc.ws);
  st.sys.tape().derive(sc.point, st.all, 2, sc.ws.eval, sc.hess);
}

void canonical_residual(const ReconstructionState& st, const Jet& jet, std::span<double> out) {
  thread_local ReconstructionScratch sc;
  invert_for_jet(st, jet, sc);
  const PhaseSpace& sp = st.sys.space();
  const std::size_t n = sp.n(), k = sp.k();
  const long m = static_cast<long>(n * k);
  const DualValue& H = sc.hess;
  sc.hpp.resize(m, m);
  sc.rhs.resize(m, static_cast<long>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a) {
      std::size_t r = i * k + a, pr = sp.momentum(i, a);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < k; ++c) sc.hpp(static_cast<long>(r), static_cast<long>(j * k + c)) = H.dd(pr, sp.momentum(j, c));
      // d_b of dh/dp = d_b q_a, expanded in the chain rule.
      for (std::size_t b = 0; b < k; ++b) {
        double v = jet.dd(i, a, b);
        for (std::size_t j = 0; j < n; ++j) v -= H.dd(pr, sp.field(j)) * jet.d(j, b);
        for (std::size_t g = 0; g < k; ++g) v -= H.dd(pr, sp.z(g)) * jet.dzd(g, b);
        sc.rhs(static_cast<long>(r), static_cast<long>(b)) = v;
      }
    }
  Eigen::MatrixXd dp = sc.hpp.partialPivLu().solve(sc.rhs);  // dp(r, b) = d_b P_r
  for (std::size_t i = 0; i < n; ++i) {
    double v = H.gradient[sp.field(i)];
    for (std::size_t a = 0; a < k; ++a) {
      v += dp(static_cast<long>(i * k + a), static_cast<long>(a));
      v += H.gradient[sp.z(a)] * sc.point[sp.momentum(i, a)];
    }
    out[i] = v;
  }
}

void adapted_residual(const ReconstructionState& st, const std::vector<CompiledExpr>& theta, const Jet& jet,
                      std::span<double> out) {
  thread_local ReconstructionScratch sc;
  invert_for_jet(st, jet, sc);
  const PhaseSpace& sp = st.sys.space();
  const std::size_t n = sp.n();
  const DualValue& H = sc.hess;
  sc.hpp.resize(static_cast<long>(n), static_cast<long>(n));
  sc.rhs.resize(static_cast<long>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pr = sp.momentum(i, 1);
    for (std::size_t j = 0; j < n; ++j) sc.hpp(static_cast<long>(i), static_cast<long>(j)) = H.dd(pr, sp.momentum(j, 1));
    double v = jet.dd(i, 1, 1);
    for (std::size_t j = 0; j < n; ++j) v -= H.dd(pr, sp.field(j)) * jet.d(j, 1);
    v -= H.dd(pr, sp.z(0)) * jet.dzd(0, 1) + H.dd(pr, sp.z(1)) * jet.dzd(1, 1);
    sc.rhs(static_cast<long>(i), 0) = v;
  }
  Eigen::VectorXd dxpi = sc.hpp.partialPivLu().solve(sc.rhs);
  Eigen::MatrixXd om = sp.omega(sc.point);
  const double hzt = H.gradient[sp.z(0)], hzx = H.gradient[sp.z(1)];
  for (std::size_t i = 0; i < n; ++i) {
    double v = -dxpi(static_cast<long>(i));
    for (std::size_t j = 0; j < n; ++j) v += om(static_cast<long>(j), static_cast<long>(i)) * jet.d(j, 0);
    double th = theta[i].value(sc.point, sc.ws.eval);
    v -= H.gradient[sp.field(i)] + hzt * th + hzx * sc.point[sp.momentum(i, 1)];
    out[i] = v;
  }
}

}  // namespace

SecondOrderPDE reconstruct_second_order(const HdDWSystem& sys, const InversionOptions& options) {
  auto st = std::make_shared<ReconstructionState>(ReconstructionState{sys, options, {}, sys.space().make_point()});
  st->all.resize(sys.space().coordinate_count());
  std::iota(st->all.begin(), st->all.end(), 0);
  const PhaseSpace& sp = sys.space();
  if (!sp.adapted()) {
    // Only h = g(q, p) + sum_a A_a(q) (z^a)^l_a with integer l_a >= 0 reduces
    // to a closed second-order system; probe the shape at fixed points.
    std::mt19937_64 rng(0x6b636f6eULL);
    std::uniform_real_distribution<double> dist(0.25, 1.25);
    std::vector<std::vector<double>> samples;
    for (int s = 0; s < 16; ++s) {
      std::vector<double> pt = sp.make_point();
      for (std::size_t c = 0; c < sp.coordinate_count(); ++c) pt[c] = dist(rng);
      try {
        (void)eval(sys.hamiltonian(), pt);
      } catch (const DomainError&) {
        continue;
      }
      samples.push_back(std::move(pt));
    }
    auto lam = contact_exponents(sys, samples);
    bool ok = lam.has_value();
    if (ok)
      for (double l : *lam) ok = ok && l >= -1e-8 && std::fabs(l - std::round(l)) <= 1e-6;
    if (!ok)
      throw std::invalid_argument(
          "Hamiltonian is not of the form g(q,p) + sum_a A_a(q) (z^a)^l with integer l >= 0");
    return SecondOrderPDE("reconstructed", sp.field_names(), sp.k(), 2, sp.n(),
                          [st](const Jet& j, std::span<double> out) { canonical_residual(*st, j, out); });
  }
  auto theta = std::make_shared<std::vector<CompiledExpr>>();
  for (std::size_t i = 0; i < sp.n(); ++i) theta->emplace_back(sp.theta(i));
  SecondOrderPDE pde("reconstructed", sp.field_names(), 2, 1, sp.n(),
                     [st, theta](const Jet& j, std::span<double> out) { adapted_residual(*st, *theta, j, out); });
  // The time derivatives enter only through Omega(y).
  pde.set_time_matrix([st](const Jet& j, std::span<const std::size_t> evolved,
                           std::span<const std::size_t> components, Eigen::MatrixXd& m) {
    const PhaseSpace& s = st->sys.space();
    std::vector<double> point = st->base_point;
    for (std::size_t i = 0; i < s.n(); ++i) point[s.field(i)] = j.u[i];
    Eigen::MatrixXd om = s.omega(point);
    for (std::size_t c = 0; c < components.size(); ++c)
      for (std::size_t e = 0; e < evolved.size(); ++e)
        m(static_cast<long>(c), static_cast<long>(e)) = om(static_cast<long>(evolved[e]), static_cast<long>(components[c]));
  });
  return pde;
}


std::optional<std::vector<double>> contact_exponents(const HdDWSystem& sys,
                                                     const std::vector<std::vector<double>>& samples) {
  const PhaseSpace& sp = sys.space();
  const std::size_t k = sp.k();
  std::vector<std::size_t> all(sp.coordinate_count());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::optional<double>> lam(k);
  EvalWorkspace ws;
  DualValue d;
  constexpr double tol = 1e-8;
  for (const auto& pt : samples) {
    sys.tape().derive(pt, all, 2, ws, d);
    for (std::size_t a = 0; a < k; ++a) {
      std::size_t za = sp.z(a);
      for (std::size_t p : sp.momentum_block())
        if (std::fabs(d.dd(za, p)) > tol) return std::nullopt;
      for (std::size_t b = 0; b < k; ++b)
        if (b != a && std::fabs(d.dd(za, sp.z(b))) > tol) return std::nullopt;
      double hz = d.gradient[za], hzz = d.dd(za, za), zv = pt[za];
      double l;
      if (std::fabs(hz) <= tol && std::fabs(hzz) <= tol) {
        l = 0.0;
      } else if (std::fabs(hz) <= tol || zv == 0.0) {
        continue;  // this sample does not pin the exponent down
      } else {
        l = 1.0 + zv * hzz / hz;
      }
      if (lam[a] && std::fabs(*lam[a] - l) > 1e-6 * std::max(1.0, std::fabs(l))) return std::nullopt;
      lam[a] = l;
    }
  }
  std::vector<double> out(k);
  for (std::size_t a = 0; a < k; ++a) {
    if (!lam[a]) return std::nullopt;
    out[a] = *lam[a];
  }
  return out;
}

ResidualReport reconstructed_residual_on_grid(const HdDWSystem& sys, const Trajectory& traj,
                                              const InversionOptions& options) {
  const PhaseSpace& sp = sys.space();
  const std::size_t n = sp.n(), k = sp.k(), mpf = sp.momenta_per_field();
  const Grid& g = traj.grid();
  if (g.dims() + 1 != k) throw std::invalid_argument("grid dimension does not match the phase space");
  const std::size_t need = sp.adapted() ? 3 : 5;
  if (traj.size() < need) throw std::invalid_argument("too few snapshots for the reconstructed residual");
  const double dt = traj.save_interval();
  std::vector<std::size_t> fch(n), zch(k);
  for (std::size_t i = 0; i < n; ++i) fch[i] = traj[0].channel_index(sp.field_names()[i]);
  for (std::size_t a = 0; a < k; ++a) zch[a] = traj[0].channel_index(sp.coordinate_name(sp.z(a)));

  std::vector<std::size_t> block = sp.momentum_block();
  MomentumSolver solver(sys, block, options);
  PointWorkspace ws;
  std::vector<double> point, target(block.size());
  const std::size_t N = g.size(), S = traj.size();

  auto deriv = [&](std::size_t s, std::size_t ch, std::size_t flat, std::size_t axis) {
    if (axis == 0) return (traj[s + 1].channel(ch)[flat] - traj[s - 1].channel(ch)[flat]) / (2.0 * dt);
    return d1_at(g, traj[s].channel(ch), flat, axis - 1, Parity::Even);
  };
  auto load = [&](std::size_t s, std::size_t flat) {
    point = sp.make_point();
    for (std::size_t i = 0; i < n; ++i) point[sp.field(i)] = traj[s].channel(fch[i])[flat];
    for (std::size_t a = 0; a < k; ++a) point[sp.z(a)] = traj[s].channel(zch[a])[flat];
  };

  // Inverted momenta per snapshot (interior in time) and node.
  std::vector<std::vector<std::vector<double>>> P(S);  // [snapshot][momentum][node]
  const std::size_t first = 1, last = S - 1;
  for (std::size_t s = first; s < last; ++s) {
    P[s].assign(block.size(), std::vector<double>(N, 0.0));
    for (std::size_t flat = 0; flat < N; ++flat) {
      load(s, flat);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < mpf; ++m) {
          std::size_t axis = sp.adapted() ? 1 : m;
          target[i * mpf + m] = deriv(s, fch[i], flat, axis);
          point[block[i * mpf + m]] = target[i * mpf + m];
        }
      solver.solve(point, target, ws);
      for (std::size_t b = 0; b < block.size(); ++b) P[s][b][flat] = point[block[b]];
    }
  }

  std::vector<std::string> names;
  for (const auto& f : sp.field_names()) names.push_back("reconstructed:" + f);
  ResidualAccumulator acc(names, g, dt, false);
  std::vector<double> res(n);
  const std::size_t s0 = sp.adapted() ? 1 : 2, s1 = sp.adapted() ? S - 1 : S - 2;
  for (std::size_t s = s0; s < s1; ++s) {
    for (std::size_t flat = 0; flat < N; ++flat) {
      if (g.on_boundary(flat)) continue;
      bool near = false;
      for (std::size_t a = 0; a < g.dims() && g.boundary != Boundary::Periodic; ++a) {
        std::size_t i = g.axis_index(flat, a);
        near = near || i < 2 || i + 2 >= g.points[a];
      }
      if (near) continue;
      load(s, flat);
      for (std::size_t b = 0; b < block.size(); ++b) point[block[b]] = P[s][b][flat];
      const DualValue& d = sys.gradient(point, ws);
      std::vector<double> grad = d.gradient;
      auto dP = [&](std::size_t b, std::size_t axis) {
        if (axis == 0) return (P[s + 1][b][flat] - P[s - 1][b][flat]) / (2.0 * dt);
        return d1_at(g, P[s][b], flat, axis - 1, Parity::Even);
      };
      Eigen::MatrixXd om;
      if (sp.adapted()) om = sp.omega(point);
      for (std::size_t i = 0; i < n; ++i) {
        double r;
        if (!sp.adapted()) {
          r = grad[sp.field(i)];
          for (std::size_t a = 0; a < k; ++a) r += dP(i * k + a, a) + grad[sp.z(a)] * point[sp.momentum(i, a)];
        } else {
          double th = eval(sp.theta(i), point);
          r = -dP(i, 1) - grad[sp.field(i)] - grad[sp.z(0)] * th - grad[sp.z(1)] * point[sp.momentum(i, 1)];
          for (std::size_t j = 0; j < n; ++j) r += om(static_cast<long>(j), static_cast<long>(i)) * deriv(s, fch[j], flat, 0);
        }
        res[i] = r;
      }
      acc.add(s, flat, res);
    }
  }
  return std::move(acc).finish();
}

}  // namespace kcontact
