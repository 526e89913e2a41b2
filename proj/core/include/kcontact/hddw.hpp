#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kcontact/ad.hpp"
#include "kcontact/phase_space.hpp"

namespace kcontact {

/// Scratch for pointwise evaluation; one per thread.
struct PointWorkspace {
  EvalWorkspace eval;
  DualValue dual;
};

/// Hamiltonian-de Donder-Weyl system of a Hamiltonian on a phase space.
///
/// Canonical form:
///   d_b q^i = dh/dp_i^b
///   sum_a d_a p_i^a = -(dh/dq^i + sum_a p_i^a dh/dz^a)
///   sum_a d_a z^a = sum p dh/dp - h
///
/// Adapted form, with Omega the exterior derivative of theta:
///   d_x y^i = dh/dpi_i
///   sum_j Omega_ji d_t y^j - d_x pi_i = dh/dy^i + dh/dz^t theta_i + dh/dz^x pi_i
///   d_t z^t + d_x z^x = theta . d_t y + pi . d_x y - h
class HdDWSystem {
 public:
  HdDWSystem(PhaseSpace space, Expr h);

  const PhaseSpace& space() const { return space_; }
  const Expr& hamiltonian() const { return h_; }
  const CompiledExpr& tape() const { return tape_; }

  /// Equation labels in residual order.
  std::vector<std::string> equation_names() const;
  std::size_t equation_count() const { return equation_names().size(); }

  /// Value and gradient of h with respect to all coordinates.
  const DualValue& gradient(std::span<const double> point, PointWorkspace& ws) const;
  /// Value, gradient and Hessian with respect to all coordinates.
  const DualValue& hessian(std::span<const double> point, PointWorkspace& ws) const;

  struct CanonicalRHS {
    std::vector<double> field;    // n*k, dh/dp_i^b
    std::vector<double> balance;  // n
    double dissipative = 0.0;
  };
  void canonical_rhs(std::span<const double> point, CanonicalRHS& out, PointWorkspace& ws) const;

  struct AdaptedRHS {
    std::vector<double> constitutive;  // n, dh/dpi_i
    std::vector<double> balance;       // n, right-hand side of the balance law
    std::vector<double> theta;         // n
    double h = 0.0;
  };
  void adapted_rhs(std::span<const double> point, AdaptedRHS& out, PointWorkspace& ws) const;
  double theta_value(std::size_t i, std::span<const double> point, PointWorkspace& ws) const;

 private:
  PhaseSpace space_;
  Expr h_;
  CompiledExpr tape_;
  std::vector<std::size_t> all_coords_;
  std::vector<CompiledExpr> theta_tapes_;
};

struct ResidualSample {
  std::size_t snapshot = 0;
  std::size_t node = 0;
  double value = 0.0;
};

struct EquationResidual {
  std::string name;
  double max_abs = 0.0;
  double l2 = 0.0;  // sqrt(sum r^2 dV dt) over the evaluated samples
  std::vector<ResidualSample> points;
};

struct ResidualReport {
  std::vector<EquationResidual> equations;
  std::size_t samples = 0;
  double dt = 0.0;
  std::vector<double> spacing;  // per spatial axis

  double max_abs() const;
  const EquationResidual& at(std::string_view name) const;
  /// Rows (equation, snapshot, grid_index, residual), then a summary block.
  void write_csv(std::ostream& os) const;
  /// Summary only: (equation, max_abs, l2).
  void write_summary_csv(std::ostream& os) const;
};

/// Collects pointwise residuals and keeps the norms in step with them.
class ResidualAccumulator {
 public:
  ResidualAccumulator(std::vector<std::string> names, const Grid& grid, double dt, bool keep_points = true);
  void add(std::size_t snapshot, std::size_t node, std::span<const double> r);
  ResidualReport finish() &&;

 private:
  ResidualReport rep_;
  std::vector<double> sumsq_;
  double cell_ = 0.0;
  bool keep_ = true;
};

/// Gathers the coordinates at one grid node of a snapshot into a phase-space
/// point. Channels are looked up by coordinate name.
class PointGather {
 public:
  PointGather(const PhaseSpace& space, const FieldState& layout);
  void gather(const FieldState& s, std::size_t flat, std::vector<double>& point) const;
  std::size_t channel_of(std::size_t coordinate) const { return channel_[coordinate]; }

 private:
  std::vector<double> base_;
  std::vector<std::size_t> channel_;
};

/// Discrete residual of every HdDW equation on a full-section trajectory.
/// Derivatives are centered in time and space; only interior snapshots and
/// interior grid nodes enter the norms. On periodic grids z^x is treated as
/// living on the interval cut at the first column (see reconstruct_zx) and
/// gets one-sided second-order differences at the two cut columns.
ResidualReport residual_on_state(const HdDWSystem& sys, const Trajectory& traj, bool keep_points = true);

}  // namespace kcontact
