#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kcontact/dissipation.hpp"
#include "kcontact/regularity.hpp"
#include "kcontact/sim.hpp"

namespace kcontact {

using Macros = std::vector<std::pair<std::string, std::string>>;

struct SpaceSpec {
  SpaceKind kind = SpaceKind::Canonical;
  std::vector<std::string> fields;        // canonical fields or adapted base coordinates
  std::vector<std::string> independents;  // canonical only
  std::vector<std::string> fibre;         // adapted only
  std::vector<std::string> theta;         // adapted only

  PhaseSpace build(std::vector<Parameter> params) const;
};

/// Adapted models: which base fields carry the physical equation and which
/// stay at zero. `governing[i]` is the balance component whose time
/// derivative term is d_t evolved[i].
struct Reduction {
  std::vector<std::string> evolved;
  std::vector<std::string> pinned;
  std::vector<std::string> governing;
  /// Coordinates (auxiliary fields and their momenta) that vanish on the reduction.
  std::vector<std::string> zero_block;
};

struct SymmetryDecl {
  std::string name;
  std::map<std::string, std::string> components;  // coordinate -> expression
  ParamOverrides params;                           // values under which Y is a symmetry
  Macros macros;                                   // macro overrides under which Y is a symmetry
  std::vector<std::string> expected_current;       // F^a as text, for reference
};

class Model;

/// Gives target residuals access to parameters and macro functions.
class TargetContext {
 public:
  TargetContext(const PhaseSpace& space, const Macros& macros, std::vector<std::string> fields);
  double p(std::string_view name) const { return point_[space_->parameter_index(name)]; }
  /// Macro value and derivative with respect to a field, at the jet's field values.
  double m(std::string_view macro, const Jet& jet) const;
  double dm(std::string_view macro, const Jet& jet, std::string_view field) const;

 private:
  void load(const Jet& jet, std::vector<double>& pt) const;
  const PhaseSpace* space_;
  std::vector<double> point_;
  std::vector<std::size_t> field_index_;
  std::map<std::string, CompiledExpr, std::less<>> macros_;
};

struct TargetSpec {
  std::string display;
  std::vector<std::string> fields;
  int time_order = 2;
  std::size_t k = 2;
  /// Reconstructed residual = scale * target residual on the governing components.
  std::function<double(const TargetContext&)> scale;
  std::function<void(const TargetContext&, const Jet&, std::span<double>)> residual;
};

struct SimDefaults {
  std::vector<std::size_t> points{128};
  std::vector<double> lower{0.0};
  std::vector<double> upper{6.283185307179586};
  Boundary boundary = Boundary::Periodic;
  double t_end = 1.0;
  std::map<std::string, std::string> initial;
  std::string z_profile;  // empty: z^t follows its balance law
};

struct ModelEntry {
  std::string id;
  std::string title;
  SpaceSpec space;
  std::vector<Parameter> params;
  Macros macros;
  std::string hamiltonian;
  std::optional<Reduction> reduction;
  std::optional<InertiaSignature> expected_signature;
  std::optional<PDEType> expected_type;
  std::vector<SymmetryDecl> symmetries;
  std::map<std::string, double> lower_bounds;  // field -> strict lower bound (u > 0)
  std::optional<TargetSpec> target;
  SimDefaults sim;
  std::vector<std::string> derivation_notes;   // momentum substitutions, printed by derive
  bool candidate = false;
};

/// The worked models, in a fixed order.
const std::vector<ModelEntry>& catalog();
std::vector<std::string> list_models();
/// Unverified candidate Hamiltonians; not part of list_models().
const std::vector<ModelEntry>& candidates();
/// Throws std::invalid_argument naming the known ids.
const ModelEntry& get_model(std::string_view id);

/// A catalog entry with parameters and macros bound.
class Model {
 public:
  explicit Model(const ModelEntry& entry, const ParamOverrides& params = {}, const Macros& macro_overrides = {});

  const ModelEntry& entry() const { return *entry_; }
  const PhaseSpace& space() const { return system_->space(); }
  const HdDWSystem& system() const { return *system_; }
  const Macros& macros() const { return macros_; }
  const Expr& hamiltonian() const { return system_->hamiltonian(); }

  /// The target equation as a residual operator on its own fields.
  SecondOrderPDE target_pde() const;
  double target_scale() const;
  /// Reconstructed equation; for adapted models with the reduction applied.
  SecondOrderPDE reconstructed(const InversionOptions& options = {}) const;

  /// Indices (into the space's base fields) of the reduction blocks.
  std::vector<std::size_t> evolved_fields() const;
  std::vector<std::size_t> pinned_fields() const;
  std::vector<std::size_t> governing_components() const;

  /// Simulation config from the entry's defaults: grid, horizon, initial
  /// data, z-profile and lower bounds (raised to u_min).
  SimConfig default_sim(double u_min = 1e-3) const;
  /// Lifts a field trajectory through the consistent reduction (adapted) or
  /// the regular Legendre map (canonical). Throws for adapted entries
  /// without a reduction.
  Trajectory lift(const Trajectory& fields) const;

  /// Expands macros into a space-bound expression.
  Expr parse(std::string_view text) const { return space().parse(text, macros_); }

 private:
  const ModelEntry* entry_;
  Macros macros_;
  std::shared_ptr<HdDWSystem> system_;
};

/// Random phase-space points with the model's parameters filled in. Fields
/// with a lower bound are drawn from (bound + 0.2, bound + 1.5), every other
/// coordinate from [-1, 1].
std::vector<std::vector<double>> sample_points(const Model& model, std::size_t count, std::uint64_t seed);

/// Random jets over all base fields of the space. Pinned fields of a reduction
/// are zero with all their derivatives.
std::vector<Jet> sample_jets(const Model& model, std::size_t count, std::uint64_t seed);

struct TargetAgreement {
  std::size_t samples = 0;
  double max_abs_difference = 0.0;
  /// Largest |target residual|, for judging the difference.
  double max_abs_target = 0.0;
};

/// Reconstructed residual against scale * target residual, component by
/// component, on the governing components.
TargetAgreement compare_with_target(const Model& model, std::span<const Jet> jets);

}  // namespace kcontact
