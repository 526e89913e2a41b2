#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "kcontact/hddw.hpp"

namespace kcontact {

/// F = (F^1, ..., F^k) over the phase-space vocabulary.
struct Current {
  std::vector<Expr> components;
};

/// Vector field Y, one component per coordinate (parameters excluded).
struct SymmetryField {
  std::vector<Expr> components;

  /// Components given by coordinate name; missing names are zero.
  static SymmetryField parse(const PhaseSpace& space, const std::map<std::string, std::string>& components,
                             const std::vector<std::pair<std::string, std::string>>& macros = {});
};

/// F^a = -eta^a(Y). Canonical: -Y^{z_a} + sum_i p_i^a Y^{q_i}. Adapted:
/// F^t = -Y^{z_t} + sum_i theta_i Y^{y_i} and F^x = -Y^{z_x} + sum_i pi_i Y^{y_i}.
Current current_from_symmetry(const SymmetryField& y, const PhaseSpace& space);

/// Components of the contact forms as expressions: eta[a][c] is the dx^c
/// coefficient of eta^a.
std::vector<std::vector<Expr>> contact_form(const PhaseSpace& space);

struct SymmetryCheck {
  double lyh_max = 0.0;       // max |Y(h)|
  double lie_eta_max = 0.0;   // max |(L_Y eta^a)_c|
  bool is_symmetry = false;
  std::size_t samples = 0;
};

SymmetryCheck check_symmetry(const SymmetryField& y, const HdDWSystem& sys,
                             const std::vector<std::vector<double>>& samples, double tolerance = 1e-10);

/// Residual of div(F o psi) + sum_a (dh/dz^a)(F^a o psi) on a trajectory, with
/// the same centered differences as residual_on_state.
ResidualReport dissipation_residual(const Current& f, const HdDWSystem& sys, const Trajectory& traj,
                                    bool keep_points = true);

struct WeightedSeries {
  std::vector<double> time;
  std::vector<double> value;   // e^{lambda t} * integral of the channel
  std::vector<double> drift;   // |value - value[0]| / scale
  double max_drift = 0.0;
  double scale = 1.0;
};

/// e^{lambda t} * int p dx per snapshot, trapezoid rule (periodic grids sum
/// every node once). The drift is relative to max(|W(0)|, int |p(0)| dx), or
/// absolute when both vanish.
WeightedSeries weighted_momentum_check(const Trajectory& traj, double lambda, std::string_view channel = "p_t");

void write_csv(std::ostream& os, const WeightedSeries& w);

}  // namespace kcontact
