#include "kcontact/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace kcontact {

namespace {

void require_identifiers(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) throw std::invalid_argument(std::string("no ") + what + " given");
  for (const auto& s : names)
    if (!is_identifier(s)) throw std::invalid_argument(std::string("bad ") + what + " name '" + s + "'");
}

// Independent-variable labels may be bare digits ("0".."3"); they only need to
// form identifiers once prefixed.
void require_labels(const std::vector<std::string>& names) {
  if (names.empty()) throw std::invalid_argument("no independent variables given");
  std::set<std::string> seen;
  for (const auto& s : names) {
    if (s.empty() || !is_identifier("p_" + s))
      throw std::invalid_argument("bad independent variable label '" + s + "'");
    if (!seen.insert(s).second) throw std::invalid_argument("duplicate independent variable '" + s + "'");
  }
}

}  // namespace

void PhaseSpace::finish_vocabulary(std::vector<std::string> coords, std::vector<Parameter> params) {
  for (auto& c : coords) vocab_.add(std::move(c));
  for (const auto& p : params) {
    if (!std::isfinite(p.value))
      throw std::invalid_argument("parameter '" + p.name + "' is not finite");
    vocab_.add(p.name);
  }
  params_ = std::move(params);
}

PhaseSpace PhaseSpace::make_canonical(std::vector<std::string> fields,
                                      std::vector<std::string> independents,
                                      std::vector<Parameter> params) {
  require_identifiers(fields, "field");
  require_labels(independents);
  PhaseSpace s;
  s.kind_ = SpaceKind::Canonical;
  std::vector<std::string> coords = fields;
  for (const auto& f : fields)
    for (const auto& a : independents)
      coords.push_back(fields.size() == 1 ? "p_" + a : "p_" + f + "_" + a);
  for (const auto& a : independents) coords.push_back("z_" + a);
  s.fields_ = std::move(fields);
  s.independents_ = std::move(independents);
  s.finish_vocabulary(std::move(coords), std::move(params));
  return s;
}

PhaseSpace PhaseSpace::make_adapted(std::vector<std::string> base, std::vector<std::string> fibre,
                                    const std::vector<std::string>& theta,
                                    std::vector<Parameter> params) {
  require_identifiers(base, "base coordinate");
  require_identifiers(fibre, "fibre coordinate");
  if (fibre.size() != base.size())
    throw std::invalid_argument("fibre and base dimensions differ");
  if (theta.size() != base.size())
    throw std::invalid_argument("theta needs one component per base coordinate");
  PhaseSpace s;
  s.kind_ = SpaceKind::Adapted;
  std::vector<std::string> coords = base;
  coords.insert(coords.end(), fibre.begin(), fibre.end());
  coords.push_back("z_t");
  coords.push_back("z_x");
  s.fields_ = std::move(base);
  s.independents_ = {"t", "x"};
  s.finish_vocabulary(std::move(coords), std::move(params));

  const std::size_t n = s.n();
  for (const auto& text : theta) {
    Expr e = s.parse(text);
    for (std::size_t v : variables_of(e))
      if (v >= n && v < s.coordinate_count())
        throw std::invalid_argument("theta component '" + text +
                                    "' depends on a non-base coordinate '" + s.vocab_.name(v) + "'");
    s.theta_.push_back(e);
    s.theta_tapes_.emplace_back(e);
  }
  return s;
}

std::size_t PhaseSpace::momentum(std::size_t i, std::size_t alpha) const {
  if (i >= n() || alpha >= k()) throw std::out_of_range("momentum index out of range");
  if (adapted()) {
    if (alpha != 1) throw std::out_of_range("adapted spaces carry spatial momenta only");
    return n() + i;
  }
  return n() + i * k() + alpha;
}

std::size_t PhaseSpace::z(std::size_t alpha) const {
  if (alpha >= k()) throw std::out_of_range("contact index out of range");
  return n() + n() * momenta_per_field() + alpha;
}

std::vector<std::size_t> PhaseSpace::momentum_block() const {
  std::vector<std::size_t> out(n() * momenta_per_field());
  std::iota(out.begin(), out.end(), n());
  return out;
}

std::vector<std::size_t> PhaseSpace::field_block() const {
  std::vector<std::size_t> out(n());
  std::iota(out.begin(), out.end(), 0);
  return out;
}

std::vector<std::size_t> PhaseSpace::z_block() const {
  std::vector<std::size_t> out(k());
  std::iota(out.begin(), out.end(), z(0));
  return out;
}

std::vector<std::string> PhaseSpace::coordinate_names() const {
  return {vocab_.names().begin(), vocab_.names().begin() + static_cast<long>(coordinate_count())};
}

std::size_t PhaseSpace::parameter_index(std::string_view name) const {
  auto i = vocab_.find(name);
  if (!i || *i < coordinate_count()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return *i;
}

double PhaseSpace::parameter(std::string_view name) const {
  return params_.at(parameter_index(name) - coordinate_count()).value;
}

PhaseSpace PhaseSpace::with_parameters(const ParamOverrides& overrides) const {
  PhaseSpace copy = *this;
  for (const auto& [name, value] : overrides) {
    if (!std::isfinite(value)) throw std::invalid_argument("parameter '" + name + "' is not finite");
    if (!vocab_.contains(name) || vocab_.index_of(name) < coordinate_count()) {
      std::string known;
      for (const auto& p : params_) known += (known.empty() ? "" : ", ") + p.name;
      throw std::invalid_argument("unknown parameter '" + name + "' (known: " + known + ")");
    }
    copy.params_.at(parameter_index(name) - coordinate_count()).value = value;
  }
  return copy;
}

std::vector<double> PhaseSpace::make_point() const {
  std::vector<double> p(vocab_.size(), 0.0);
  for (std::size_t j = 0; j < params_.size(); ++j) p[coordinate_count() + j] = params_[j].value;
  return p;
}

Eigen::MatrixXd PhaseSpace::omega(std::span<const double> point) const {
  if (!adapted()) throw std::logic_error("omega is defined on adapted spaces only");
  const std::size_t nn = n();
  std::vector<std::size_t> wrt = field_block();
  Eigen::MatrixXd J(nn, nn);  // J(i, j) = d_j theta_i
  EvalWorkspace ws;
  DualValue d;
  for (std::size_t i = 0; i < nn; ++i) {
    theta_tapes_[i].derive(point, wrt, 1, ws, d);
    for (std::size_t j = 0; j < nn; ++j) J(i, j) = d.gradient[j];
  }
  return J - J.transpose();
}

// ---------------------------------------------------------------------------

std::string_view boundary_name(Boundary b) {
  switch (b) {
    case Boundary::Periodic: return "periodic";
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
  }
  return "?";
}

Boundary boundary_from_name(std::string_view s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "dirichlet") return Boundary::Dirichlet;
  if (s == "neumann") return Boundary::Neumann;
  throw std::invalid_argument("unknown boundary kind '" + std::string(s) + "'");
}

Grid Grid::line(std::size_t n, double lo, double hi, Boundary b) { return box({n}, {lo}, {hi}, b); }

Grid Grid::box(std::vector<std::size_t> n, std::vector<double> lo, std::vector<double> hi, Boundary b) {
  if (n.empty() || n.size() != lo.size() || n.size() != hi.size())
    throw std::invalid_argument("grid extents disagree in dimension");
  for (std::size_t a = 0; a < n.size(); ++a) {
    if (n[a] < 3) throw std::invalid_argument("grid needs at least 3 points per axis");
    if (!(hi[a] > lo[a])) throw std::invalid_argument("grid axis has empty extent");
  }
  return Grid{std::move(n), std::move(lo), std::move(hi), b};
}

std::size_t Grid::size() const {
  return std::accumulate(points.begin(), points.end(), std::size_t{1}, std::multiplies<>());
}

double Grid::spacing(std::size_t axis) const {
  double len = upper[axis] - lower[axis];
  return boundary == Boundary::Periodic ? len / static_cast<double>(points[axis])
                                        : len / static_cast<double>(points[axis] - 1);
}

std::size_t Grid::stride(std::size_t axis) const {
  std::size_t s = 1;
  for (std::size_t a = axis + 1; a < points.size(); ++a) s *= points[a];
  return s;
}

double Grid::coordinate(std::size_t axis, std::size_t i) const {
  return lower[axis] + spacing(axis) * static_cast<double>(i);
}

bool Grid::on_boundary(std::size_t flat) const {
  if (boundary == Boundary::Periodic) return false;
  for (std::size_t a = 0; a < dims(); ++a) {
    std::size_t i = axis_index(flat, a);
    if (i == 0 || i + 1 == points[a]) return true;
  }
  return false;
}

FieldState::FieldState(Grid grid, std::vector<std::string> channels, double time)
    : grid_(std::move(grid)), names_(std::move(channels)), time_(time) {
  data_.assign(names_.size() * grid_.size(), 0.0);
}

std::size_t FieldState::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < names_.size(); ++c)
    if (names_[c] == name) return c;
  throw std::out_of_range("no channel named '" + std::string(name) + "'");
}

bool FieldState::has_channel(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

bool FieldState::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Trajectory::save_interval() const {
  if (snapshots.size() < 2) throw std::logic_error("trajectory has fewer than two snapshots");
  return snapshots[1].time() - snapshots[0].time();
}

}  // namespace kcontact
