#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcontact/regularity.hpp"

namespace kcontact {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field norm grew past the blow-up factor or became non-finite.
class InstabilityError : public SimulationError {
 public:
  InstabilityError(const std::string& what, double time) : SimulationError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// The requested step violates the scheme's stability bound, or the
/// equation is not of the type the scheme needs.
class StabilityError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Initial data outside the model's domain (e.g. u below u_min).
class DomainRestrictionError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Scalar function of (t, x) with its space-time gradient. Text functions are
/// parsed against t, the spatial names (x, or x1..xd), pi and parameters, and
/// differentiated exactly; plain callables get central differences unless a
/// gradient is supplied.
class SpaceTimeFunction {
 public:
  using Fn = std::function<double(double, std::span<const double>)>;
  using GradFn = std::function<void(double, std::span<const double>, std::span<double>)>;

  SpaceTimeFunction() = default;
  SpaceTimeFunction(Fn f, GradFn grad = {});  // NOLINT(google-explicit-constructor)
  static SpaceTimeFunction parse(std::string_view text, std::size_t dims, const std::vector<Parameter>& params = {});
  static SpaceTimeFunction constant(double c);

  explicit operator bool() const { return static_cast<bool>(f_); }
  double operator()(double t, std::span<const double> x) const { return f_(t, x); }
  /// out[0] = d/dt, out[1 + a] = d/dx_a.
  void gradient(double t, std::span<const double> x, std::span<double> out) const;
  /// Source text, empty for callables.
  const std::string& text() const { return text_; }

 private:
  Fn f_;
  GradFn grad_;
  std::string text_;
};

/// Spatial coordinate names used in initial-condition text.
std::vector<std::string> spatial_names(std::size_t dims);

struct SimConfig {
  Grid grid = Grid::line(128, 0.0, 6.283185307179586);
  double t_end = 1.0;
  /// 0 picks the largest stable step that divides t_end.
  double dt = 0.0;
  /// Steps between saved snapshots; 0 saves about 200 snapshots.
  std::size_t save_every = 0;
  /// Courant number bound for hyperbolic schemes.
  double cfl = 0.9;
  /// Diffusion number bound for parabolic schemes.
  double diffusion_number = 0.25;
  /// Field values keyed by name, rates keyed "<field>_t".
  std::map<std::string, SpaceTimeFunction> initial;
  /// Prescribed z^t(t, x); empty means z^t follows its balance law.
  SpaceTimeFunction z_profile;
  /// Initial data must be at least this on the listed fields.
  std::map<std::string, double> lower_bounds;
  double blowup_factor = 1e6;
  InversionOptions inversion{};
};

/// Parses textual initial data into the config's function map.
void set_initial(SimConfig& cfg, const std::map<std::string, std::string>& text,
                 const std::vector<Parameter>& params = {});

struct RunInfo {
  std::string scheme;
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t save_every = 0;
  /// Courant number (hyperbolic) or diffusion number (parabolic) actually used.
  double stability_number = 0.0;
};

/// Largest stable step for the HdDW integrator of `sys` on cfg's initial data.
double stable_dt(const HdDWSystem& sys, const SimConfig& cfg);
double stable_dt(const SecondOrderPDE& pde, const SimConfig& cfg);

/// Integrates the HdDW equations in time.
///
/// Canonical spaces: staggered leapfrog on (q, p^t) with Crank-Nicolson
/// damping, spatial momenta slaved to the field gradients through the
/// constitutive relations. Adapted spaces: RK4 on every base field with the
/// fibre momenta slaved the same way. z^t follows cfg.z_profile or its
/// balance law with z^x slack; z^x is then rebuilt by quadrature.
Trajectory run_hddw(const HdDWSystem& sys, const SimConfig& cfg, RunInfo* info = nullptr);

/// Integrates a second-order system directly: three-level leapfrog for
/// time_order 2, RK4 for time_order 1. z comes from cfg.z_profile (else 0).
Trajectory run_second_order(const SecondOrderPDE& pde, const SimConfig& cfg, RunInfo* info = nullptr);

/// Rebuilds z^x on every snapshot from the dissipative balance by trapezoid
/// quadrature along the first spatial axis, with z^x = 0 on its first column.
/// `zt_rate[s][node]` is d_t z^t. Adapted spaces also need the field rates
/// `yt[s][i * N + node]`; without them centered time differences are used.
/// Other spatial contact variables are set to zero.
void reconstruct_zx(const HdDWSystem& sys, Trajectory& traj, const std::vector<std::vector<double>>& zt_rate,
                    const std::vector<std::vector<double>>* yt = nullptr);

struct LiftOptions {
  SpaceTimeFunction z_profile;
  InversionOptions inversion{};
};

/// Full phase-space section from a field trajectory. Fields missing from the
/// trajectory are auxiliary and set to zero; momenta are inverted from
/// centered derivatives; z^t comes from the profile (else 0) and z^x from
/// quadrature.
Trajectory lift(const Trajectory& fields, const HdDWSystem& sys, const LiftOptions& options = {});

struct CrossLevel {
  std::size_t points = 0;
  double dx = 0.0;
  double dt = 0.0;
  double discrepancy = 0.0;  // max over snapshots, nodes and shared fields
  double seconds = 0.0;
};

struct CrossReport {
  std::vector<std::string> fields;
  std::vector<CrossLevel> levels;
  /// Least-squares slope of log discrepancy against log dx.
  double order = 0.0;
  std::vector<double> pairwise_orders;
};

/// Runs both integrators from the same data on `levels` successively
/// doubled grids (dt halved for hyperbolic and quartered for parabolic runs).
CrossReport cross_validate(const HdDWSystem& sys, const SecondOrderPDE& pde, const SimConfig& cfg,
                           std::size_t levels = 3);

/// Least-squares slope of log(err) against log(h).
double fitted_order(std::span<const double> h, std::span<const double> err);

/// Doubles the resolution of a grid: 2N points when periodic, 2N - 1 otherwise.
Grid refine(const Grid& g);

/// CSV with one row per node: spatial coordinates, then channels.
void write_snapshot_csv(std::ostream& os, const FieldState& s);
FieldState read_snapshot_csv(std::istream& is, const Grid& grid, double time);
/// Writes snapshot_NNNNN.csv files and returns their names.
std::vector<std::string> write_trajectory_csv(const std::filesystem::path& dir, const Trajectory& traj);

}  // namespace kcontact
