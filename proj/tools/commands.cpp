#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "trajectory_io.hpp"

namespace kcontact::cli {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

namespace {

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::vector<std::string> names_of(const PhaseSpace& sp, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(sp.coordinate_name(i));
  return out;
}

Expr var(const PhaseSpace& sp, std::size_t c) { return Expr::variable(c, sp.coordinate_name(c)); }

/// A representative point: coordinates 0.5, bounded fields one above the bound.
std::vector<double> default_point(const Model& m) {
  const PhaseSpace& sp = m.space();
  std::vector<double> pt = sp.make_point();
  for (std::size_t c = 0; c < sp.coordinate_count(); ++c) pt[c] = 0.5;
  for (const auto& [name, bound] : m.entry().lower_bounds) pt[sp.vocabulary().index_of(name)] = bound + 1.0;
  return pt;
}

std::string signed_term(const Expr& coef, const std::string& what, bool first) {
  if (coef.is_constant(1.0)) return (first ? "" : " + ") + what;
  if (coef.is_constant(-1.0)) return (first ? "-" : " - ") + what;
  return (first ? "" : " + ") + ("(" + coef.to_string() + ")*") + what;
}

void print_canonical(const Model& m, std::ostream& out) {
  const PhaseSpace& sp = m.space();
  const Expr& h = m.hamiltonian();
  const auto& ind = sp.independent_names();
  for (std::size_t i = 0; i < sp.n(); ++i)
    for (std::size_t b = 0; b < sp.k(); ++b)
      out << "  " << sp.field_names()[i] << "_" << ind[b] << " = " << derivative(h, sp.momentum(i, b)).to_string()
          << "\n";
  for (std::size_t i = 0; i < sp.n(); ++i) {
    std::string lhs;
    Expr rhs = derivative(h, sp.field(i));
    for (std::size_t a = 0; a < sp.k(); ++a) {
      lhs += (a ? " + d_" : "d_") + ind[a] + " " + sp.coordinate_name(sp.momentum(i, a));
      rhs = rhs + var(sp, sp.momentum(i, a)) * derivative(h, sp.z(a));
    }
    out << "  " << lhs << " = " << (-rhs).to_string() << "\n";
  }
  std::string lhs;
  for (std::size_t a = 0; a < sp.k(); ++a) lhs += (a ? " + d_" : "d_") + ind[a] + " " + sp.coordinate_name(sp.z(a));
  Expr rhs(0.0);
  for (std::size_t c : sp.momentum_block()) rhs = rhs + var(sp, c) * derivative(h, c);
  out << "  " << lhs << " = " << (rhs - h).to_string() << "\n";
}

void print_adapted(const Model& m, std::ostream& out) {
  const PhaseSpace& sp = m.space();
  const Expr& h = m.hamiltonian();
  const std::size_t n = sp.n();
  for (std::size_t i = 0; i < n; ++i)
    out << "  " << sp.field_names()[i] << "_x = " << derivative(h, sp.momentum(i, 1)).to_string() << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::string lhs;
    for (std::size_t j = 0; j < n; ++j) {
      // Omega_ji = d_i theta_j - d_j theta_i
      Expr om = derivative(sp.theta(j), sp.field(i)) - derivative(sp.theta(i), sp.field(j));
      if (om.is_constant(0.0)) continue;
      lhs += signed_term(om, "d_t " + sp.field_names()[j], lhs.empty());
    }
    lhs += (lhs.empty() ? "-d_x " : " - d_x ") + sp.coordinate_name(sp.momentum(i, 1));
    Expr rhs = derivative(h, sp.field(i)) + derivative(h, sp.z(0)) * sp.theta(i) +
               derivative(h, sp.z(1)) * var(sp, sp.momentum(i, 1));
    out << "  " << lhs << " = " << rhs.to_string() << "\n";
  }
  std::string rhs;
  for (std::size_t i = 0; i < n; ++i) {
    if (sp.theta(i).is_constant(0.0)) continue;
    rhs += signed_term(sp.theta(i), sp.field_names()[i] + "_t", rhs.empty());
  }
  Expr rest(0.0);
  for (std::size_t i = 0; i < n; ++i) rest = rest + var(sp, sp.momentum(i, 1)) * derivative(h, sp.momentum(i, 1));
  rest = rest - h;
  if (!rest.is_constant(0.0)) rhs += (rhs.empty() ? "" : " + ") + ("(" + rest.to_string() + ")");
  if (rhs.empty()) rhs = "0";
  out << "  d_t z_t + d_x z_x = " << rhs << "\n";
}

bool is_hyperbolic_run(const RunConfig& rc, const Model& m) {
  if (rc.solver == "hddw") return !m.space().adapted();
  if (rc.solver == "target") return m.target_pde().time_order() == 2;
  return !m.space().adapted();
}

SecondOrderPDE direct_pde(const RunConfig& rc, const Model& m, const SimConfig& sim) {
  return rc.solver == "target" ? m.target_pde() : m.reconstructed(sim.inversion);
}

Trajectory run_once(const RunConfig& rc, const Model& m, const SimConfig& sim, RunInfo& info) {
  if (rc.solver == "hddw") return run_hddw(m.system(), sim, &info);
  return run_second_order(direct_pde(rc, m, sim), sim, &info);
}

/// Channels holding the physical fields of a run.
std::vector<std::string> evolved_channels(const RunConfig& rc, const Model& m) {
  if (rc.solver == "target") {
    SecondOrderPDE p = m.target_pde();
    std::vector<std::string> out;
    for (std::size_t e : p.evolved()) out.push_back(p.fields()[e]);
    return out;
  }
  std::vector<std::string> out;
  for (std::size_t i : m.evolved_fields()) out.push_back(m.space().field_names()[i]);
  return out;
}

Manifest base_manifest(const RunConfig& rc, const Model& m, const std::string& command) {
  Manifest man;
  man.command = command;
  man.model = m.entry().id;
  man.config_hash = rc.hash;
  man.seed = rc.seed;
  for (const auto& p : m.space().parameters()) man.parameters[p.name] = p.value;
  return man;
}

void print_norms(const Trajectory& traj, const std::vector<std::string>& channels, std::ostream& out) {
  const FieldState& last = traj.snapshots.back();
  const Grid& g = last.grid();
  double cell = 1.0;
  for (std::size_t a = 0; a < g.dims(); ++a) cell *= g.spacing(a);
  for (const auto& c : channels) {
    if (!last.has_channel(c)) continue;
    double mx = 0.0, l2 = 0.0;
    for (double v : last.channel(c)) {
      mx = std::max(mx, std::fabs(v));
      l2 += v * v * cell;
    }
    out << "  " << c << " at t = " << num(last.time()) << ": max|.| = " << num(mx) << ", L2 = " << num(std::sqrt(l2))
        << "\n";
  }
}

std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  f << std::setprecision(17);
  return f;
}

/// Pass rule for a residual measured on one or more levels.
struct Verdict {
  bool pass = true;
  std::string note;
};

Verdict judge(const std::vector<double>& dx, const std::vector<double>& values, double tolerance, double order_min) {
  Verdict v;
  double worst = *std::max_element(values.begin(), values.end());
  if (worst == 0.0) {
    v.note = "exactly 0";
    return v;
  }
  if (values.size() == 1) {
    v.pass = values[0] <= tolerance;
    v.note = (v.pass ? "<= " : "> ") + num(tolerance);
    return v;
  }
  // Pointwise inversions converge to about 1e-12, so smaller residuals carry no order.
  if (worst <= 1e-10) {
    v.note = "at solver round-off";
    return v;
  }
  double order = fitted_order(dx, values);
  v.pass = order >= order_min;
  v.note = "order " + num(order) + (v.pass ? " >= " : " < ") + num(order_min);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<LevelRun> run_levels(const RunConfig& rc, const Model& m, const SimConfig& sim, std::size_t levels,
                                 bool same_times) {
  std::vector<LevelRun> runs;
  if (levels <= 1) {
    LevelRun r;
    r.traj = run_once(rc, m, sim, r.info);
    r.dx = sim.grid.spacing(0);
    runs.push_back(std::move(r));
    return runs;
  }
  double dt0 = sim.dt;
  if (dt0 <= 0.0)
    dt0 = rc.solver == "hddw" ? stable_dt(m.system(), sim) : stable_dt(direct_pde(rc, m, sim), sim);
  if (!std::isfinite(dt0)) throw StabilityError("no stability limit for a refinement study; set [scheme] dt");
  std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(sim.t_end / dt0 - 1e-9)));
  std::size_t save = sim.save_every ? sim.save_every : std::max<std::size_t>(1, steps / 20);
  const std::size_t factor = is_hyperbolic_run(rc, m) ? 2 : 4;

  SimConfig c = sim;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0) {
      c.grid = refine(c.grid);
      steps *= factor;
      if (same_times) save *= factor;
    }
    c.dt = sim.t_end / static_cast<double>(steps);
    c.save_every = save;
    LevelRun r;
    r.traj = run_once(rc, m, c, r.info);
    r.dx = c.grid.spacing(0);
    runs.push_back(std::move(r));
  }
  return runs;
}

double level_difference(const Trajectory& coarse, const Trajectory& fine, const std::vector<std::string>& channels) {
  if (coarse.size() != fine.size()) throw SimulationError("refinement levels saved different snapshot counts");
  const Grid& gc = coarse.grid();
  const Grid& gf = fine.grid();
  double d = 0.0;
  for (std::size_t s = 0; s < coarse.size(); ++s)
    for (const auto& name : channels) {
      auto a = coarse[s].channel(name), b = fine[s].channel(name);
      for (std::size_t flat = 0; flat < gc.size(); ++flat) {
        std::size_t ff = 0;
        for (std::size_t ax = 0; ax < gc.dims(); ++ax) ff += 2 * gc.axis_index(flat, ax) * gf.stride(ax);
        d = std::max(d, std::fabs(a[flat] - b[ff]));
      }
    }
  return d;
}

int cmd_list_models(bool with_candidates, std::ostream& out) {
  for (const auto& e : catalog()) out << std::left << std::setw(18) << e.id << e.title << "\n";
  if (with_candidates) {
    out << "\nunverified candidates (no target equation):\n";
    for (const auto& e : candidates()) out << std::left << std::setw(28) << e.id << e.title << "\n";
  }
  return kOk;
}

int cmd_derive(const RunConfig& rc, std::ostream& out) {
  Model m = rc.model();
  const PhaseSpace& sp = m.space();
  const ModelEntry& e = m.entry();
  out << "model: " << e.id << " (" << e.title << ")\n";
  if (sp.adapted()) {
    out << "space: adapted two-contact, base (" << join(sp.field_names()) << "), fibre ("
        << join(names_of(sp, sp.momentum_block())) << ")\n";
    std::vector<std::string> th;
    for (std::size_t i = 0; i < sp.n(); ++i) th.push_back(sp.theta(i).to_string());
    out << "theta: (" << join(th) << ")\n";
  } else {
    out << "space: canonical k-contact, fields (" << join(sp.field_names()) << "), independents ("
        << join(sp.independent_names()) << ")\n";
  }
  std::vector<std::string> ps;
  for (const auto& p : sp.parameters()) ps.push_back(p.name + "=" + num(p.value));
  if (!ps.empty()) out << "parameters: " << join(ps) << "\n";
  for (const auto& [name, body] : m.macros()) out << "macro: " << name << " = " << body << "\n";
  out << "h = " << m.hamiltonian().to_string() << "\n\n";

  out << "HdDW equations:\n";
  if (sp.adapted())
    print_adapted(m, out);
  else
    print_canonical(m, out);

  auto samples = sample_points(m, 64, rc.seed);
  RegularityReport reg = check_regular(m.system(), samples);
  out << "\nmomentum elimination:\n";
  if (!reg.regular) {
    out << "  warning: degenerate Hamiltonian, the momentum Hessian is singular (min relative |det| = "
        << num(reg.min_relative_det) << " over " << reg.samples
        << " samples); the momenta cannot be eliminated and no second-order equation follows\n";
    return kOk;
  }
  if (!e.derivation_notes.empty())
    for (const auto& note : e.derivation_notes) out << "  " << note << "\n";
  else
    out << "  momenta from the first equations by pointwise Newton inversion\n";
  out << "  regular on " << reg.samples << " samples (min relative |det| = " << num(reg.min_relative_det) << ")\n";
  if (e.reduction)
    out << "  reduction: evolve (" << join(e.reduction->evolved) << "), hold (" << join(e.reduction->zero_block)
        << ") at zero\n";
  if (!sp.adapted() && sp.n() == 1) out << "  " << classify(m.system(), default_point(m)).to_string() << "\n";

  out << "\nsecond-order equation:\n";
  if (e.target) {
    out << "  " << e.target->display << "\n";
    auto jets = sample_jets(m, 100, rc.seed);
    TargetAgreement ag = compare_with_target(m, jets);
    out << "  reconstruction agrees on " << ag.samples << " random jets: max |difference| = "
        << num(ag.max_abs_difference) << " (target residuals up to " << num(ag.max_abs_target) << ")\n";
  } else {
    out << "  reconstructed numerically; no closed form on record for this model\n";
  }
  return kOk;
}

int cmd_classify(const RunConfig& rc, std::ostream& out) {
  Model m = rc.model();
  out << classify(m.system(), default_point(m)).to_string() << "\n";
  return kOk;
}

int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  Model m = rc.model();
  SimConfig sim = rc.sim(m);
  const auto channels = evolved_channels(rc, m);
  auto runs = run_levels(rc, m, sim, rc.refine, true);

  for (std::size_t l = 0; l < runs.size(); ++l) {
    const auto& r = runs[l];
    out << (runs.size() > 1 ? "level " + std::to_string(l) + ": " : "") << m.entry().id << ": " << r.info.scheme
        << ", " << r.traj.grid().size() << " nodes, dt = " << num(r.info.dt) << ", steps = " << r.info.steps
        << ", snapshots = " << r.traj.size() << ", stability number = " << num(r.info.stability_number) << "\n";
    print_norms(r.traj, channels, out);
  }

  std::vector<double> diffs;
  if (runs.size() > 1) {
    out << "\nself-convergence (max difference to the next level on shared nodes):\n";
    out << "  level   points          dx          dt  difference   order\n";
    for (std::size_t l = 0; l + 1 < runs.size(); ++l)
      diffs.push_back(level_difference(runs[l].traj, runs[l + 1].traj, channels));
    for (std::size_t l = 0; l < runs.size(); ++l) {
      out << "  " << std::setw(5) << l << std::setw(9) << runs[l].traj.grid().points[0] << std::setw(12)
          << num(runs[l].dx) << std::setw(12) << num(runs[l].info.dt);
      if (l < diffs.size()) {
        out << std::setw(12) << num(diffs[l]);
        if (l > 0) out << std::setw(8) << num(std::log2(diffs[l - 1] / diffs[l]));
      }
      out << "\n";
    }
  }

  if (!rc.out.empty()) {
    Manifest man = base_manifest(rc, m, "simulate");
    if (runs.size() == 1) {
      man.run = runs[0].info;
      save_trajectory(rc.out, runs[0].traj, man);
    } else {
      for (std::size_t l = 0; l < runs.size(); ++l) {
        Manifest lm = base_manifest(rc, m, "simulate");
        lm.run = runs[l].info;
        save_trajectory(rc.out / ("level_" + std::to_string(l)), runs[l].traj, lm);
        man.outputs.push_back("level_" + std::to_string(l));
      }
      auto f = open_out(rc.out, "refinement.csv");
      f << "level,points,dx,dt,difference,order\n";
      for (std::size_t l = 0; l < runs.size(); ++l) {
        f << l << ',' << runs[l].traj.grid().points[0] << ',' << runs[l].dx << ',' << runs[l].info.dt << ',';
        if (l < diffs.size()) f << diffs[l];
        f << ',';
        if (l > 0 && l < diffs.size()) f << std::log2(diffs[l - 1] / diffs[l]);
        f << '\n';
      }
      man.outputs.push_back("refinement.csv");
      man.run = runs.back().info;
      man.grid = runs.back().traj.grid();
      write_manifest(rc.out, man);
    }
    out << "wrote " << rc.out.string() << "\n";
  }
  return kOk;
}

int cmd_verify(const RunConfig& rc, std::ostream& out) {
  Model m = rc.model();
  const HdDWSystem& sys = m.system();
  const VerifyConfig& vc = rc.verify;

  std::vector<LevelRun> runs;
  if (!vc.trajectory.empty()) {
    LevelRun r;
    r.traj = load_trajectory(vc.trajectory);
    r.info = read_manifest(vc.trajectory).run;
    r.dx = r.traj.grid().spacing(0);
    out << "loaded " << r.traj.size() << " snapshots from " << vc.trajectory << "\n";
    runs.push_back(std::move(r));
  } else {
    SimConfig sim = rc.sim(m);
    runs = run_levels(rc, m, sim, rc.refine, false);
    if (rc.solver != "hddw")
      for (auto& r : runs) r.traj = m.lift(r.traj);
    for (std::size_t l = 0; l < runs.size(); ++l)
      out << "level " << l << ": " << runs[l].info.scheme << ", " << runs[l].traj.grid().size()
          << " nodes, dt = " << num(runs[l].info.dt) << ", " << runs[l].traj.size() << " snapshots\n";
  }
  std::vector<double> dx;
  for (const auto& r : runs) dx.push_back(r.dx);

  bool all_pass = true;
  auto report = [&](const std::string& name, const std::vector<double>& values, const Verdict& v) {
    all_pass = all_pass && v.pass;
    out << "  " << (v.pass ? "pass" : "FAIL") << "  " << name << ":";
    for (double x : values) out << " " << num(x);
    out << "  (" << v.note << ")\n";
  };

  std::ofstream residual_csv;
  if (!rc.out.empty()) {
    residual_csv = open_out(rc.out, "residuals.csv");
    residual_csv << "check,equation,level,dx,max_abs,l2\n";
  }

  if (vc.hddw_residual) {
    out << "\nHdDW residuals (max norm per level):\n";
    std::vector<ResidualReport> reps;
    for (const auto& r : runs) reps.push_back(residual_on_state(sys, r.traj, false));
    for (std::size_t q = 0; q < reps[0].equations.size(); ++q) {
      std::vector<double> v;
      for (std::size_t l = 0; l < reps.size(); ++l) {
        const auto& eq = reps[l].equations[q];
        v.push_back(eq.max_abs);
        if (residual_csv) residual_csv << "hddw," << eq.name << ',' << l << ',' << dx[l] << ',' << eq.max_abs << ','
                                       << eq.l2 << '\n';
      }
      report(reps[0].equations[q].name, v, judge(dx, v, vc.residual_tolerance, vc.order_min));
    }
  }

  if (vc.dissipation) {
    std::vector<std::pair<std::string, Current>> currents;
    auto samples = sample_points(m, 100, rc.seed);
    for (const auto& decl : m.entry().symmetries) {
      SymmetryField y = SymmetryField::parse(m.space(), decl.components, m.macros());
      SymmetryCheck chk = check_symmetry(y, sys, samples);
      if (!chk.is_symmetry) {
        out << "\n  skip  current of '" << decl.name << "': not a symmetry at these parameters (max |Y(h)| = "
            << num(chk.lyh_max) << ")\n";
        continue;
      }
      currents.emplace_back(decl.name, current_from_symmetry(y, m.space()));
    }
    if (!vc.current.empty()) {
      Current f;
      for (const auto& ind : m.space().independent_names()) {
        auto it = vc.current.find(ind);
        f.components.push_back(it == vc.current.end() ? Expr(0.0) : m.parse(it->second));
      }
      for (const auto& [key, text] : vc.current)
        if (std::find(m.space().independent_names().begin(), m.space().independent_names().end(), key) ==
            m.space().independent_names().end())
          throw ConfigError("current component '" + key + "' names no independent variable");
      currents.emplace_back("configured", std::move(f));
    }
    if (!currents.empty()) out << "\ndissipation laws (max norm per level):\n";
    for (const auto& [name, f] : currents) {
      std::vector<std::string> comps;
      for (const auto& c : f.components) comps.push_back(c.to_string());
      std::vector<double> v;
      for (std::size_t l = 0; l < runs.size(); ++l) {
        ResidualReport rr = dissipation_residual(f, sys, runs[l].traj, false);
        v.push_back(rr.equations[0].max_abs);
        if (residual_csv) residual_csv << "current," << name << ',' << l << ',' << dx[l] << ','
                                       << rr.equations[0].max_abs << ',' << rr.equations[0].l2 << '\n';
      }
      report("F = (" + join(comps) + ") from " + name, v, judge(dx, v, vc.dissipation_tolerance, vc.order_min));
    }
  }

  if (vc.weighted_momentum) {
    out << "\nweighted momentum, lambda = " << num(vc.weighted_lambda) << " (relative drift per level):\n";
    std::vector<double> v;
    WeightedSeries last;
    for (const auto& r : runs) {
      last = weighted_momentum_check(r.traj, vc.weighted_lambda, vc.weighted_channel);
      v.push_back(last.max_drift);
    }
    Verdict ver;
    ver.pass = v.back() <= vc.weighted_tolerance;
    ver.note = "finest " + num(v.back()) + (ver.pass ? " <= " : " > ") + num(vc.weighted_tolerance);
    report("exp(lambda t) * integral of " + vc.weighted_channel, v, ver);
    if (!rc.out.empty()) {
      auto f = open_out(rc.out, "weighted.csv");
      write_csv(f, last);
    }
  }

  if (vc.cross_validate) {
    if (!m.entry().target) throw ConfigError("cross validation needs a model with a target equation");
    SimConfig sim = rc.sim(m);
    CrossReport cr = cross_validate(sys, m.target_pde(), sim, std::max<std::size_t>(rc.refine, 3));
    out << "\ncross validation against the direct solver (max discrepancy per level):\n";
    std::vector<double> v;
    for (const auto& lv : cr.levels) v.push_back(lv.discrepancy);
    Verdict ver;
    ver.pass = cr.order >= vc.order_min;
    ver.note = "order " + num(cr.order) + (ver.pass ? " >= " : " < ") + num(vc.order_min);
    report("HdDW run vs target equation", v, ver);
    if (!rc.out.empty()) {
      auto f = open_out(rc.out, "cross_validate.csv");
      f << "points,dx,dt,discrepancy,seconds\n";
      for (const auto& lv : cr.levels)
        f << lv.points << ',' << lv.dx << ',' << lv.dt << ',' << lv.discrepancy << ',' << lv.seconds << '\n';
    }
  }

  if (!rc.out.empty()) {
    Manifest man = base_manifest(rc, m, "verify");
    man.run = runs.back().info;
    man.grid = runs.back().traj.grid();
    man.channels = runs.back().traj[0].channel_names();
    man.outputs = {"residuals.csv"};
    if (vc.weighted_momentum) man.outputs.push_back("weighted.csv");
    if (vc.cross_validate) man.outputs.push_back("cross_validate.csv");
    write_manifest(rc.out, man);
  }

  out << "\nverification " << (all_pass ? "passed" : "FAILED") << "\n";
  return all_pass ? kOk : kVerificationFailed;
}

}  // namespace kcontact::cli
