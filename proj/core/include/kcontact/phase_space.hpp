#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kcontact/ad.hpp"
#include "kcontact/expr.hpp"

namespace kcontact {

struct Parameter {
  std::string name;
  double value = 0.0;
};

using ParamOverrides = std::map<std::string, double>;

enum class SpaceKind { Canonical, Adapted };

/// Coordinates of a k-contact phase space.
///
/// Canonical: fields q^i (n), momenta p_i^a (n*k), contact variables z^a (k).
/// Adapted two-contactification: base y^i (n), spatial fibre momenta pi_i (n),
/// z^t, z^x, and a basic one-form theta_i(y) standing in for the time momenta.
///
/// The vocabulary lists coordinates first and then parameters, so a point is a
/// vector over the whole vocabulary with parameter slots pre-filled.
class PhaseSpace {
 public:
  /// Momentum names are p_<var> when n == 1 and p_<field>_<var> otherwise;
  /// contact variables are z_<var>.
  static PhaseSpace make_canonical(std::vector<std::string> fields,
                                   std::vector<std::string> independents,
                                   std::vector<Parameter> params = {});

  /// theta_e entries are parsed against the base coordinates and parameters.
  /// Independent variables are t and x; contact variables are z_t and z_x.
  static PhaseSpace make_adapted(std::vector<std::string> base, std::vector<std::string> fibre,
                                 const std::vector<std::string>& theta,
                                 std::vector<Parameter> params = {});

  SpaceKind kind() const { return kind_; }
  bool adapted() const { return kind_ == SpaceKind::Adapted; }
  std::size_t n() const { return fields_.size(); }
  std::size_t k() const { return independents_.size(); }

  std::size_t field(std::size_t i) const { return i; }
  /// Canonical: any alpha. Adapted: alpha must be 1 (the spatial axis).
  std::size_t momentum(std::size_t i, std::size_t alpha) const;
  std::size_t z(std::size_t alpha) const;
  /// Number of momentum slots per field: k (canonical) or 1 (adapted).
  std::size_t momenta_per_field() const { return adapted() ? 1 : k(); }
  /// Momentum indices ordered field-major, (i, alpha).
  std::vector<std::size_t> momentum_block() const;
  std::vector<std::size_t> field_block() const;
  std::vector<std::size_t> z_block() const;
  std::size_t coordinate_count() const { return n() + n() * momenta_per_field() + k(); }

  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<std::string>& field_names() const { return fields_; }
  const std::vector<std::string>& independent_names() const { return independents_; }
  const std::string& coordinate_name(std::size_t c) const { return vocab_.name(c); }
  std::vector<std::string> coordinate_names() const;

  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_index(std::string_view name) const;
  double parameter(std::string_view name) const;
  /// Copy with some parameter values replaced; unknown names throw
  /// std::invalid_argument.
  PhaseSpace with_parameters(const ParamOverrides& overrides) const;

  /// Zero coordinates and parameter values.
  std::vector<double> make_point() const;

  /// Adapted only.
  const Expr& theta(std::size_t i) const { return theta_.at(i); }
  /// Omega_ij = d_j theta_i - d_i theta_j at a point.
  Eigen::MatrixXd omega(std::span<const double> point) const;

  Expr parse(std::string_view text) const { return kcontact::parse(text, vocab_); }
  Expr parse(std::string_view text, const std::vector<std::pair<std::string, std::string>>& macros) const {
    return parse_with_macros(text, vocab_, macros);
  }

 private:
  PhaseSpace() = default;
  void finish_vocabulary(std::vector<std::string> coords, std::vector<Parameter> params);

  SpaceKind kind_ = SpaceKind::Canonical;
  std::vector<std::string> fields_;
  std::vector<std::string> independents_;
  std::vector<Parameter> params_;
  Vocabulary vocab_;
  std::vector<Expr> theta_;
  std::vector<CompiledExpr> theta_tapes_;
};

// ---------------------------------------------------------------------------
// Discretized fields

enum class Boundary { Periodic, Dirichlet, Neumann };

std::string_view boundary_name(Boundary b);
Boundary boundary_from_name(std::string_view s);

/// Uniform tensor grid over the spatial independent variables. Periodic axes
/// exclude the right endpoint; the other kinds include both endpoints.
struct Grid {
  std::vector<std::size_t> points;
  std::vector<double> lower;
  std::vector<double> upper;
  Boundary boundary = Boundary::Periodic;

  static Grid line(std::size_t n, double lo, double hi, Boundary b = Boundary::Periodic);
  static Grid box(std::vector<std::size_t> n, std::vector<double> lo, std::vector<double> hi,
                  Boundary b = Boundary::Periodic);

  std::size_t dims() const { return points.size(); }
  std::size_t size() const;
  double spacing(std::size_t axis) const;
  std::size_t stride(std::size_t axis) const;
  double coordinate(std::size_t axis, std::size_t i) const;
  /// Index along `axis` of flat index `flat`.
  std::size_t axis_index(std::size_t flat, std::size_t axis) const {
    return (flat / stride(axis)) % points[axis];
  }
  /// Wall nodes of non-periodic grids; periodic grids have none.
  bool on_boundary(std::size_t flat) const;
};

/// Snapshot of named channels on a grid at one time.
class FieldState {
 public:
  FieldState() = default;
  FieldState(Grid grid, std::vector<std::string> channels, double time = 0.0);

  const Grid& grid() const { return grid_; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  std::size_t channel_count() const { return names_.size(); }
  const std::vector<std::string>& channel_names() const { return names_; }
  std::size_t channel_index(std::string_view name) const;
  bool has_channel(std::string_view name) const;

  std::span<double> channel(std::size_t c) { return {data_.data() + c * grid_.size(), grid_.size()}; }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * grid_.size(), grid_.size()};
  }
  std::span<double> channel(std::string_view name) { return channel(channel_index(name)); }
  std::span<const double> channel(std::string_view name) const { return channel(channel_index(name)); }

  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<std::string> names_;
  double time_ = 0.0;
  std::vector<double> data_;
};

/// Time-ordered snapshots sharing a grid and channel layout, equally spaced.
struct Trajectory {
  std::vector<FieldState> snapshots;

  std::size_t size() const { return snapshots.size(); }
  bool empty() const { return snapshots.empty(); }
  const FieldState& operator[](std::size_t i) const { return snapshots[i]; }
  FieldState& operator[](std::size_t i) { return snapshots[i]; }
  /// Spacing between consecutive snapshots.
  double save_interval() const;
  const Grid& grid() const { return snapshots.front().grid(); }
};

}  // namespace kcontact
