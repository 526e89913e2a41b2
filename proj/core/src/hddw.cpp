#include "kcontact/hddw.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "kcontact/stencil.hpp"

namespace kcontact {

HdDWSystem::HdDWSystem(PhaseSpace space, Expr h) : space_(std::move(space)), h_(std::move(h)), tape_(h_) {
  for (std::size_t v : variables_of(h_))
    if (v >= space_.vocabulary().size())
      throw std::invalid_argument("Hamiltonian references a symbol outside the phase space");
  all_coords_.resize(space_.coordinate_count());
  std::iota(all_coords_.begin(), all_coords_.end(), 0);
  if (space_.adapted())
    for (std::size_t i = 0; i < space_.n(); ++i) theta_tapes_.emplace_back(space_.theta(i));
}

std::vector<std::string> HdDWSystem::equation_names() const {
  std::vector<std::string> out;
  const auto& f = space_.field_names();
  if (space_.adapted()) {
    for (const auto& name : f) out.push_back("constitutive:" + name);
    for (const auto& name : f) out.push_back("balance:" + name);
  } else {
    for (const auto& name : f)
      for (const auto& a : space_.independent_names()) out.push_back("field:" + name + ":" + a);
    for (const auto& name : f) out.push_back("balance:" + name);
  }
  out.push_back("dissipative");
  return out;
}

const DualValue& HdDWSystem::gradient(std::span<const double> point, PointWorkspace& ws) const {
  tape_.derive(point, all_coords_, 1, ws.eval, ws.dual);
  return ws.dual;
}

const DualValue& HdDWSystem::hessian(std::span<const double> point, PointWorkspace& ws) const {
  tape_.derive(point, all_coords_, 2, ws.eval, ws.dual);
  return ws.dual;
}

void HdDWSystem::canonical_rhs(std::span<const double> point, CanonicalRHS& out, PointWorkspace& ws) const {
  const std::size_t n = space_.n(), k = space_.k();
  const DualValue& d = gradient(point, ws);
  out.field.resize(n * k);
  out.balance.resize(n);
  double pdp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double b = d.gradient[space_.field(i)];
    for (std::size_t a = 0; a < k; ++a) {
      std::size_t pi = space_.momentum(i, a);
      out.field[i * k + a] = d.gradient[pi];
      b += point[pi] * d.gradient[space_.z(a)];
      pdp += point[pi] * d.gradient[pi];
    }
    out.balance[i] = -b;
  }
  out.dissipative = pdp - d.value;
}

double HdDWSystem::theta_value(std::size_t i, std::span<const double> point, PointWorkspace& ws) const {
  return theta_tapes_[i].value(point, ws.eval);
}

void HdDWSystem::adapted_rhs(std::span<const double> point, AdaptedRHS& out, PointWorkspace& ws) const {
  const std::size_t n = space_.n();
  out.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.theta[i] = theta_value(i, point, ws);
  const DualValue& d = gradient(point, ws);
  out.constitutive.resize(n);
  out.balance.resize(n);
  const double hzt = d.gradient[space_.z(0)];
  const double hzx = d.gradient[space_.z(1)];
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pi = space_.momentum(i, 1);
    out.constitutive[i] = d.gradient[pi];
    out.balance[i] = d.gradient[space_.field(i)] + hzt * out.theta[i] + hzx * point[pi];
  }
  out.h = d.value;
}

// ---------------------------------------------------------------------------

double ResidualReport::max_abs() const {
  double m = 0.0;
  for (const auto& e : equations) m = std::max(m, e.max_abs);
  return m;
}

const EquationResidual& ResidualReport::at(std::string_view name) const {
  for (const auto& e : equations)
    if (e.name == name) return e;
  throw std::out_of_range("no residual for equation '" + std::string(name) + "'");
}

void ResidualReport::write_summary_csv(std::ostream& os) const {
  os << "equation,max_abs,l2,samples,dt";
  for (std::size_t a = 0; a < spacing.size(); ++a) os << ",dx" << a;
  os << '\n';
  auto old = os.precision(17);
  for (const auto& e : equations) {
    os << e.name << ',' << e.max_abs << ',' << e.l2 << ',' << samples << ',' << dt;
    for (double h : spacing) os << ',' << h;
    os << '\n';
  }
  os.precision(old);
}

void ResidualReport::write_csv(std::ostream& os) const {
  os << "equation,snapshot,grid_index,residual\n";
  auto old = os.precision(17);
  for (const auto& e : equations)
    for (const auto& p : e.points) os << e.name << ',' << p.snapshot << ',' << p.node << ',' << p.value << '\n';
  os.precision(old);
  os << '\n';
  write_summary_csv(os);
}

ResidualAccumulator::ResidualAccumulator(std::vector<std::string> names, const Grid& grid, double dt,
                                         bool keep_points)
    : sumsq_(names.size(), 0.0), cell_(dt), keep_(keep_points) {
  for (auto& n : names) rep_.equations.push_back({std::move(n), 0.0, 0.0, {}});
  rep_.dt = dt;
  for (std::size_t a = 0; a < grid.dims(); ++a) {
    rep_.spacing.push_back(grid.spacing(a));
    cell_ *= grid.spacing(a);
  }
}

void ResidualAccumulator::add(std::size_t snapshot, std::size_t node, std::span<const double> r) {
  for (std::size_t q = 0; q < sumsq_.size(); ++q) {
    if (!std::isfinite(r[q])) throw std::runtime_error("non-finite residual in " + rep_.equations[q].name);
    auto& e = rep_.equations[q];
    e.max_abs = std::max(e.max_abs, std::fabs(r[q]));
    sumsq_[q] += r[q] * r[q] * cell_;
    if (keep_) e.points.push_back({snapshot, node, r[q]});
  }
  ++rep_.samples;
}

ResidualReport ResidualAccumulator::finish() && {
  for (std::size_t q = 0; q < sumsq_.size(); ++q) rep_.equations[q].l2 = std::sqrt(sumsq_[q]);
  return std::move(rep_);
}

PointGather::PointGather(const PhaseSpace& space, const FieldState& layout) : base_(space.make_point()) {
  channel_.resize(space.coordinate_count());
  for (std::size_t c = 0; c < space.coordinate_count(); ++c) channel_[c] = layout.channel_index(space.coordinate_name(c));
}

void PointGather::gather(const FieldState& s, std::size_t flat, std::vector<double>& point) const {
  point = base_;
  for (std::size_t c = 0; c < channel_.size(); ++c) point[c] = s.channel(channel_[c])[flat];
}

ResidualReport residual_on_state(const HdDWSystem& sys, const Trajectory& traj, bool keep_points) {
  if (traj.size() < 3) throw std::invalid_argument("residual needs at least three snapshots");
  const PhaseSpace& sp = sys.space();
  const Grid& g = traj.grid();
  const std::size_t n = sp.n(), k = sp.k();
  if (g.dims() + 1 != k) throw std::invalid_argument("grid dimension does not match the phase space");
  const double dt = traj.save_interval();
  if (!(dt > 0)) throw std::invalid_argument("snapshots are not increasing in time");
  PointGather gather(sp, traj[0]);

  auto names = sys.equation_names();
  ResidualAccumulator acc(names, g, dt, keep_points);

  PointWorkspace ws;
  std::vector<double> point, r(names.size());
  HdDWSystem::CanonicalRHS crhs;
  HdDWSystem::AdaptedRHS arhs;
  std::vector<double> yt(n), yx(n);
  // z^x comes from quadrature along the first spatial axis starting at its
  // first column, so on periodic grids it need not close up across the seam.
  // There it is differenced one-sidedly instead of across the cut.
  const std::size_t zx = sp.z(1);
  const bool cut = g.boundary == Boundary::Periodic && g.points[0] >= 3;
  // d/d(axis) of a coordinate at a node; axis 0 is time.
  auto deriv = [&](std::size_t s, std::size_t coord, std::size_t flat, std::size_t axis) {
    std::size_t ch = gather.channel_of(coord);
    if (axis == 0) return (traj[s + 1].channel(ch)[flat] - traj[s - 1].channel(ch)[flat]) / (2.0 * dt);
    if (cut && coord == zx && axis == 1) {
      const std::size_t i = g.axis_index(flat, 0), last = g.points[0] - 1, st = g.stride(0);
      auto f = traj[s].channel(ch);
      const double h = g.spacing(0);
      if (i == 0) return (-3.0 * f[flat] + 4.0 * f[flat + st] - f[flat + 2 * st]) / (2.0 * h);
      if (i == last) return (3.0 * f[flat] - 4.0 * f[flat - st] + f[flat - 2 * st]) / (2.0 * h);
    }
    return d1_at(g, traj[s].channel(ch), flat, axis - 1, Parity::Even);
  };

  for (std::size_t s = 1; s + 1 < traj.size(); ++s) {
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
      if (g.on_boundary(flat)) continue;
      gather.gather(traj[s], flat, point);
      std::size_t e = 0;
      if (!sp.adapted()) {
        sys.canonical_rhs(point, crhs, ws);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t a = 0; a < k; ++a) r[e++] = deriv(s, sp.field(i), flat, a) - crhs.field[i * k + a];
        for (std::size_t i = 0; i < n; ++i) {
          double div = 0.0;
          for (std::size_t a = 0; a < k; ++a) div += deriv(s, sp.momentum(i, a), flat, a);
          r[e++] = div - crhs.balance[i];
        }
        double zdiv = 0.0;
        for (std::size_t a = 0; a < k; ++a) zdiv += deriv(s, sp.z(a), flat, a);
        r[e++] = zdiv - crhs.dissipative;
      } else {
        sys.adapted_rhs(point, arhs, ws);
        Eigen::MatrixXd om = sp.omega(point);
        for (std::size_t i = 0; i < n; ++i) {
          yt[i] = deriv(s, sp.field(i), flat, 0);
          yx[i] = deriv(s, sp.field(i), flat, 1);
        }
        for (std::size_t i = 0; i < n; ++i) r[e++] = yx[i] - arhs.constitutive[i];
        for (std::size_t i = 0; i < n; ++i) {
          double lhs = -deriv(s, sp.momentum(i, 1), flat, 1);
          for (std::size_t j = 0; j < n; ++j) lhs += om(static_cast<long>(j), static_cast<long>(i)) * yt[j];
          r[e++] = lhs - arhs.balance[i];
        }
        double rhs = -arhs.h;
        for (std::size_t i = 0; i < n; ++i) rhs += arhs.theta[i] * yt[i] + point[sp.momentum(i, 1)] * yx[i];
        r[e++] = deriv(s, sp.z(0), flat, 0) + deriv(s, sp.z(1), flat, 1) - rhs;
      }
      acc.add(s, flat, r);
    }
  }
  return std::move(acc).finish();
}

}  // namespace kcontact
