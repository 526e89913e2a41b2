#include "kcontact/dissipation.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "kcontact/stencil.hpp"

namespace kcontact {

SymmetryField SymmetryField::parse(const PhaseSpace& space, const std::map<std::string, std::string>& components,
                                   const std::vector<std::pair<std::string, std::string>>& macros) {
  SymmetryField y;
  y.components.assign(space.coordinate_count(), Expr(0.0));
  for (const auto& [name, text] : components) {
    auto idx = space.vocabulary().find(name);
    if (!idx || *idx >= space.coordinate_count())
      throw std::invalid_argument("symmetry component for unknown coordinate '" + name + "'");
    y.components[*idx] = space.parse(text, macros);
  }
  return y;
}

std::vector<std::vector<Expr>> contact_form(const PhaseSpace& sp) {
  const std::size_t n = sp.n(), k = sp.k(), nc = sp.coordinate_count();
  const Vocabulary& v = sp.vocabulary();
  auto var = [&](std::size_t c) { return Expr::variable(c, v.name(c)); };
  std::vector<std::vector<Expr>> eta(k, std::vector<Expr>(nc, Expr(0.0)));
  for (std::size_t a = 0; a < k; ++a) {
    eta[a][sp.z(a)] = Expr(1.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!sp.adapted())
        eta[a][sp.field(i)] = -var(sp.momentum(i, a));
      else if (a == 0)
        eta[a][sp.field(i)] = -sp.theta(i);
      else
        eta[a][sp.field(i)] = -var(sp.momentum(i, 1));
    }
  }
  return eta;
}

Current current_from_symmetry(const SymmetryField& y, const PhaseSpace& sp) {
  if (y.components.size() != sp.coordinate_count())
    throw std::invalid_argument("symmetry field needs one component per coordinate");
  auto eta = contact_form(sp);
  Current f;
  for (const auto& row : eta) {
    Expr acc(0.0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c].is_constant(0.0) || y.components[c].is_constant(0.0)) continue;
      acc = acc - row[c] * y.components[c];
    }
    f.components.push_back(acc);
  }
  return f;
}

SymmetryCheck check_symmetry(const SymmetryField& y, const HdDWSystem& sys,
                             const std::vector<std::vector<double>>& samples, double tolerance) {
  const PhaseSpace& sp = sys.space();
  const std::size_t nc = sp.coordinate_count();
  if (y.components.size() != nc) throw std::invalid_argument("symmetry field needs one component per coordinate");
  std::vector<std::size_t> all(nc);
  std::iota(all.begin(), all.end(), 0);

  std::vector<CompiledExpr> ytape;
  for (const auto& e : y.components) ytape.emplace_back(e);
  auto eta = contact_form(sp);
  std::vector<std::vector<CompiledExpr>> etape(eta.size());
  for (std::size_t a = 0; a < eta.size(); ++a)
    for (const auto& e : eta[a]) etape[a].emplace_back(e);

  SymmetryCheck out;
  PointWorkspace ws;
  std::vector<DualValue> dy(nc);
  DualValue de;
  std::vector<std::vector<double>> etav(nc), detav(nc);
  for (const auto& pt : samples) {
    const DualValue& dh = sys.gradient(pt, ws);
    std::vector<double> hgrad = dh.gradient;
    for (std::size_t c = 0; c < nc; ++c) ytape[c].derive(pt, all, 1, ws.eval, dy[c]);
    double yh = 0.0;
    for (std::size_t c = 0; c < nc; ++c) yh += dy[c].value * hgrad[c];
    out.lyh_max = std::max(out.lyh_max, std::fabs(yh));

    // (L_Y eta)_m = Y^c d_c eta_m + eta_c d_m Y^c
    for (std::size_t a = 0; a < eta.size(); ++a) {
      std::vector<double> val(nc);
      std::vector<std::vector<double>> grad(nc);
      for (std::size_t c = 0; c < nc; ++c) {
        etape[a][c].derive(pt, all, 1, ws.eval, de);
        val[c] = de.value;
        grad[c] = de.gradient;
      }
      for (std::size_t m = 0; m < nc; ++m) {
        double l = 0.0;
        for (std::size_t c = 0; c < nc; ++c) l += dy[c].value * grad[m][c] + val[c] * dy[c].gradient[m];
        out.lie_eta_max = std::max(out.lie_eta_max, std::fabs(l));
      }
    }
    ++out.samples;
  }
  out.is_symmetry = out.lyh_max <= tolerance && out.lie_eta_max <= tolerance;
  return out;
}

ResidualReport dissipation_residual(const Current& f, const HdDWSystem& sys, const Trajectory& traj,
                                    bool keep_points) {
  const PhaseSpace& sp = sys.space();
  const std::size_t k = sp.k();
  if (f.components.size() != k) throw std::invalid_argument("current needs one component per independent variable");
  if (traj.size() < 3) throw std::invalid_argument("dissipation residual needs at least three snapshots");
  const Grid& g = traj.grid();
  if (g.dims() + 1 != k) throw std::invalid_argument("grid dimension does not match the phase space");
  const double dt = traj.save_interval();
  const std::size_t N = g.size(), S = traj.size();
  PointGather gather(sp, traj[0]);

  std::vector<CompiledExpr> tapes;
  for (const auto& e : f.components) tapes.emplace_back(e);

  // F^a on every snapshot and node.
  std::vector<std::vector<std::vector<double>>> fv(S, std::vector<std::vector<double>>(k, std::vector<double>(N)));
  PointWorkspace ws;
  std::vector<double> point;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t flat = 0; flat < N; ++flat) {
      gather.gather(traj[s], flat, point);
      for (std::size_t a = 0; a < k; ++a) fv[s][a][flat] = tapes[a].value(point, ws.eval);
    }

  ResidualAccumulator acc({"dissipation"}, g, dt, keep_points);
  double r[1];
  for (std::size_t s = 1; s + 1 < S; ++s)
    for (std::size_t flat = 0; flat < N; ++flat) {
      if (g.on_boundary(flat)) continue;
      gather.gather(traj[s], flat, point);
      const DualValue& d = sys.gradient(point, ws);
      double v = (fv[s + 1][0][flat] - fv[s - 1][0][flat]) / (2.0 * dt);
      for (std::size_t a = 1; a < k; ++a) v += d1_at(g, fv[s][a], flat, a - 1, Parity::Even);
      for (std::size_t a = 0; a < k; ++a) v += d.gradient[sp.z(a)] * fv[s][a][flat];
      r[0] = v;
      acc.add(s, flat, r);
    }
  return std::move(acc).finish();
}

WeightedSeries weighted_momentum_check(const Trajectory& traj, double lambda, std::string_view channel) {
  WeightedSeries w;
  if (traj.empty()) return w;
  const Grid& g = traj.grid();
  const std::size_t ch = traj[0].channel_index(channel);
  double cell = 1.0;
  for (std::size_t a = 0; a < g.dims(); ++a) cell *= g.spacing(a);
  auto weight = [&](std::size_t flat) {
    if (g.boundary == Boundary::Periodic) return 1.0;
    double wgt = 1.0;
    for (std::size_t a = 0; a < g.dims(); ++a) {
      std::size_t i = g.axis_index(flat, a);
      if (i == 0 || i + 1 == g.points[a]) wgt *= 0.5;
    }
    return wgt;
  };
  double abs0 = 0.0;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    auto p = traj[s].channel(ch);
    double sum = 0.0;
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
      sum += weight(flat) * p[flat];
      if (s == 0) abs0 += weight(flat) * std::fabs(p[flat]);
    }
    w.time.push_back(traj[s].time());
    w.value.push_back(std::exp(lambda * traj[s].time()) * sum * cell);
  }
  abs0 *= cell;
  w.scale = std::max(std::fabs(w.value[0]), abs0);
  if (w.scale == 0.0) w.scale = 1.0;
  for (double v : w.value) {
    w.drift.push_back(std::fabs(v - w.value[0]) / w.scale);
    w.max_drift = std::max(w.max_drift, w.drift.back());
  }
  return w;
}

void write_csv(std::ostream& os, const WeightedSeries& w) {
  os << "t,weighted_integral,drift\n";
  auto old = os.precision(17);
  for (std::size_t i = 0; i < w.time.size(); ++i) os << w.time[i] << ',' << w.value[i] << ',' << w.drift[i] << '\n';
  os.precision(old);
}

}  // namespace kcontact
