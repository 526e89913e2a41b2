#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcontact/hddw.hpp"

namespace kcontact {

/// The momentum Hessian is (numerically) singular at a point.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, std::vector<double> point)
      : std::runtime_error(what), point_(std::move(point)) {}
  const std::vector<double>& point() const { return point_; }

 private:
  std::vector<double> point_;
};

/// Newton iteration for the momentum inversion did not converge.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InertiaSignature {
  int positive = 0;
  int negative = 0;
  int zero = 0;
  std::string to_string() const;
  friend bool operator==(const InertiaSignature&, const InertiaSignature&) = default;
};

enum class PDEType { Elliptic, Hyperbolic, Ultrahyperbolic, Degenerate };
std::string_view pde_type_name(PDEType t);

struct Classification {
  InertiaSignature signature;
  PDEType type = PDEType::Degenerate;
  Eigen::MatrixXd matrix;
  /// "signature=(n+,n-,n0) type=..."
  std::string to_string() const;
};

/// Eigenvalues within rel_tol * max|eigenvalue| of zero count as zero.
Classification classify_matrix(const Eigen::MatrixXd& a, double rel_tol = 1e-10);

/// Type of the second-order equation of a scalar field on a canonical space,
/// read off the momentum Hessian at `point`.
Classification classify(const HdDWSystem& sys, std::span<const double> point);

/// Momentum Hessian: d^2 h / dp dp over the momentum block.
Eigen::MatrixXd momentum_hessian(const HdDWSystem& sys, std::span<const double> point);

struct RegularityOptions {
  /// Regular when |det| > relative_tolerance * (max |entry|)^n.
  double relative_tolerance = 1e-10;
};

struct RegularityReport {
  bool regular = true;
  std::size_t samples = 0;
  std::vector<double> determinants;
  /// min over samples of |det| / (max |entry|)^n
  double min_relative_det = 0.0;
  std::optional<std::size_t> first_singular;
};

RegularityReport check_regular(const HdDWSystem& sys, const std::vector<std::vector<double>>& samples,
                               const RegularityOptions& options = {});

/// |det H_pp|^(-1/m), m the momentum count: a length scale that vanishes as
/// the momentum Hessian blows up and grows as it degenerates.
double degeneracy_measure(const HdDWSystem& sys, std::span<const double> point);

struct InversionOptions {
  double tolerance = 1e-12;
  int max_iterations = 50;
  RegularityOptions regularity{};
};

struct InversionResult {
  int iterations = 0;
  double residual = 0.0;
};

/// Solves dh/dp_u = target for a subset u of the momenta, the other
/// coordinates fixed. Newton from the current point values, then from zero.
class MomentumSolver {
 public:
  MomentumSolver(const HdDWSystem& sys, std::vector<std::size_t> unknowns, InversionOptions options = {});

  /// `point` holds the initial guess on entry and the solution on exit.
  InversionResult solve(std::vector<double>& point, std::span<const double> target, PointWorkspace& ws) const;
  const std::vector<std::size_t>& unknowns() const { return unknowns_; }

 private:
  bool newton(std::vector<double>& point, std::span<const double> target, PointWorkspace& ws,
              InversionResult& res) const;
  const HdDWSystem* sys_;
  std::vector<std::size_t> unknowns_;
  InversionOptions options_;
};

/// Full inversion of the momentum block: dh/dp_i^a = v[i*m + a], with m the
/// momenta per field. The guess is v itself.
InversionResult invert_momenta(const HdDWSystem& sys, std::vector<double>& point, std::span<const double> v,
                               const InversionOptions& options = {});

// ---------------------------------------------------------------------------
// Second-order field equations on jets

/// Values and derivatives of the fields and contact variables at a point.
/// Axis 0 is time.
struct Jet {
  std::size_t nf = 0;
  std::size_t k = 0;
  std::vector<double> u;    // nf
  std::vector<double> du;   // nf*k
  std::vector<double> ddu;  // nf*k*k, symmetric in the last two
  std::vector<double> z;    // k
  std::vector<double> dz;   // k*k, dz[a*k + b] = d_b z^a

  Jet() = default;
  Jet(std::size_t fields, std::size_t dims);
  double& d(std::size_t i, std::size_t a) { return du[i * k + a]; }
  double d(std::size_t i, std::size_t a) const { return du[i * k + a]; }
  double& dd(std::size_t i, std::size_t a, std::size_t b) { return ddu[(i * k + a) * k + b]; }
  double dd(std::size_t i, std::size_t a, std::size_t b) const { return ddu[(i * k + a) * k + b]; }
  /// Sets both (a,b) and (b,a).
  void set_dd(std::size_t i, std::size_t a, std::size_t b, double v) { dd(i, a, b) = v; dd(i, b, a) = v; }
  double dzd(std::size_t a, std::size_t b) const { return dz[a * k + b]; }
};

/// A system of PDEs written as residual(jet) = 0, with metadata for solvers.
///
/// time_order 2: every jet field is evolved and component i governs field i.
/// time_order 1: the `evolved` jet fields are advanced by the residual
/// components listed in `components` (same length); `pinned` fields are held
/// at zero. The residual must be affine in the time derivatives of the
/// evolved fields.
class SecondOrderPDE {
 public:
  using Residual = std::function<void(const Jet&, std::span<double>)>;
  /// Fills m(c, e) for evolved fields e and governing components c.
  using TimeMatrix = std::function<void(const Jet&, std::span<const std::size_t> evolved,
                                        std::span<const std::size_t> components, Eigen::MatrixXd&)>;

  SecondOrderPDE() = default;
  SecondOrderPDE(std::string description, std::vector<std::string> fields, std::size_t k, int time_order,
                 std::size_t components, Residual residual);

  const std::string& description() const { return description_; }
  const std::vector<std::string>& fields() const { return fields_; }
  std::size_t k() const { return k_; }
  int time_order() const { return time_order_; }
  std::size_t component_count() const { return ncomp_; }

  void evaluate(const Jet& jet, std::span<double> out) const { residual_(jet, out); }

  const std::vector<std::size_t>& evolved() const { return evolved_; }
  const std::vector<std::size_t>& pinned() const { return pinned_; }
  const std::vector<std::size_t>& components() const { return components_; }

  /// Restricts a first-order-in-time system to a reduction.
  SecondOrderPDE with_reduction(std::vector<std::size_t> evolved, std::vector<std::size_t> pinned,
                                std::vector<std::size_t> components) const;

  /// Coefficient matrix of the evolved time derivatives in the selected
  /// components, M(c, e) = d residual_c / d (d_t u_e).
  void time_matrix(const Jet& jet, Eigen::MatrixXd& m) const;
  void set_time_matrix(TimeMatrix tm) { time_matrix_ = std::move(tm); }

  /// Scales every component; used to compare equations written with
  /// different normalizations.
  SecondOrderPDE scaled(double s) const;

 private:
  std::string description_;
  std::vector<std::string> fields_;
  std::size_t k_ = 0;
  int time_order_ = 2;
  std::size_t ncomp_ = 0;
  Residual residual_;
  TimeMatrix time_matrix_;
  std::vector<std::size_t> evolved_;
  std::vector<std::size_t> pinned_;
  std::vector<std::size_t> components_;
};

/// Eliminates the momenta from the HdDW system by pointwise inversion.
///
/// Canonical spaces yield, per field,
///   sum_a d_a P_i^a + dh/dq^i + sum_a dh/dz^a P_i^a = 0,
/// with P = P(q, dq, z) the inverse Legendre map and d_a P expanded through
/// its implicit derivatives. Adapted spaces yield the reduced balance law
///   sum_j Omega_ji d_t y^j - d_x Pi_i - dh/dy^i - dh/dz^t theta_i - dh/dz^x Pi_i = 0.
SecondOrderPDE reconstruct_second_order(const HdDWSystem& sys, const InversionOptions& options = {});

/// Exponents l_a when h = g(q, p) + sum_a A_a(q) (z^a)^l_a, estimated at the
/// sample points; nullopt when h is not of that shape there.
std::optional<std::vector<double>> contact_exponents(const HdDWSystem& sys,
                                                     const std::vector<std::vector<double>>& samples);

/// Residual of the reconstructed equation on a trajectory of the fields and
/// contact variables: momenta are inverted pointwise from centered
/// derivatives and then differenced again.
ResidualReport reconstructed_residual_on_grid(const HdDWSystem& sys, const Trajectory& traj,
                                              const InversionOptions& options = {});

}  // namespace kcontact
