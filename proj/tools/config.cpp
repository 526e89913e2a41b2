#include "config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <sstream>

namespace kcontact::cli {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower_case(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Ini from_ptree(const boost::property_tree::ptree& tree) {
  Ini ini;
  for (const auto& [name, child] : tree) {
    if (child.empty()) {
      ini.set("", name, trim(child.data()));
      continue;
    }
    for (const auto& [key, leaf] : child) ini.set(name, key, trim(leaf.data()));
  }
  return ini;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = lower_case(trim(v));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  double d = parse_number(v);
  if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(d);
}

template <class T, class F>
std::vector<T> parse_vector(const std::string& text, F f) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(f(item));
  return out;
}

void apply_model_section(const Ini& ini, RunConfig& rc) {
  auto id = ini.get("model", "id");
  auto h = ini.get("model", "hamiltonian");
  if (id && h) throw ConfigError("[model] gives both an id and an inline hamiltonian; use one");
  if (!id && !h) throw ConfigError("no model: pass --model ID or give [model] id or an inline hamiltonian");

  if (id) {
    try {
      rc.entry = std::make_shared<ModelEntry>(get_model(*id));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [key, value] : ini.section("model"))
      if (key != "id") throw ConfigError("[model] key '" + key + "' is only valid for inline models");
    for (const auto& [name, value] : ini.section("params")) rc.params[name] = parse_number(value);
    rc.macros = ini.section("macros");
    return;
  }

  auto e = std::make_shared<ModelEntry>();
  rc.inline_model = true;
  e->id = "inline";
  e->title = ini.get("model", "title").value_or("inline model");
  e->hamiltonian = *h;
  std::string kind = lower_case(ini.get("model", "kind").value_or("canonical"));
  if (kind == "canonical") {
    e->space.kind = SpaceKind::Canonical;
    e->space.fields = split_list(ini.get("model", "fields").value_or("u"));
    e->space.independents = split_list(ini.get("model", "independents").value_or("t, x"));
  } else if (kind == "adapted") {
    e->space.kind = SpaceKind::Adapted;
    auto need = [&](const char* key) {
      auto v = ini.get("model", key);
      if (!v) throw ConfigError(std::string("adapted inline model needs [model] ") + key);
      return split_list(*v);
    };
    e->space.fields = need("fields");
    e->space.fibre = need("fibre");
    e->space.theta = need("theta");
    if (auto ev = ini.get("model", "evolved")) {
      Reduction r;
      r.evolved = split_list(*ev);
      r.pinned = split_list(ini.get("model", "pinned").value_or(""));
      r.governing = split_list(ini.get("model", "governing").value_or(""));
      r.zero_block = split_list(ini.get("model", "zero_block").value_or(""));
      e->reduction = r;
    }
  } else {
    throw ConfigError("[model] kind must be canonical or adapted, got '" + kind + "'");
  }
  for (const auto& f : split_list(ini.get("model", "positive").value_or(""))) e->lower_bounds[f] = 0.0;
  for (const auto& [name, value] : ini.section("params")) e->params.push_back({name, parse_number(value)});
  e->macros = ini.section("macros");

  const std::size_t dims = e->space.kind == SpaceKind::Canonical ? e->space.independents.size() - 1 : 1;
  if (dims == 0) throw ConfigError("an inline model needs at least one spatial independent variable");
  e->sim.points.assign(dims, 128);
  e->sim.lower.assign(dims, 0.0);
  e->sim.upper.assign(dims, 6.283185307179586);
  rc.entry = std::move(e);
}

}  // namespace

// ---------------------------------------------------------------------------

Ini Ini::read(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return from_ptree(tree);
}

Ini Ini::parse(const std::string& text) {
  std::istringstream is(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return from_ptree(tree);
}

void Ini::set(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& e : entries_)
    if (e.section == section && e.key == key) {
      e.value = value;
      return;
    }
  entries_.push_back({section, key, value});
}

void Ini::erase_section(const std::string& section) {
  std::erase_if(entries_, [&](const Entry& e) { return e.section == section; });
}

std::optional<std::string> Ini::get(const std::string& section, const std::string& key) const {
  for (const auto& e : entries_)
    if (e.section == section && e.key == key) return e.value;
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> Ini::section(const std::string& name) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries_)
    if (e.section == name) out.emplace_back(e.key, e.value);
  return out;
}

bool Ini::has_section(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.section == name; });
}

std::string Ini::canonical() const {
  std::string out;
  for (const auto& e : entries_) out += "[" + e.section + "] " + e.key + " = " + e.value + "\n";
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& text) {
  static const Vocabulary vocab({"pi"});
  static const double pi[1] = {3.141592653589793};
  try {
    return eval(parse(text, vocab), pi);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read a number from '" + text + "': " + e.what());
  }
}

Model RunConfig::model() const { return Model(*entry, params, macros); }

SimConfig RunConfig::sim(const Model& m) const {
  SimConfig cfg = m.default_sim(u_min);
  const auto& params = m.space().parameters();
  if (points || lower || upper || boundary) {
    Grid g = cfg.grid;
    if (points) g.points = *points;
    if (lower) g.lower = *lower;
    if (upper) g.upper = *upper;
    if (boundary) g.boundary = *boundary;
    const std::size_t d = g.points.size();
    if (g.lower.size() != d || g.upper.size() != d)
      throw ConfigError("[grid] points, lower and upper need one entry per spatial axis");
    cfg.grid = Grid::box(g.points, g.lower, g.upper, g.boundary);
  }
  if (cfg.grid.dims() + 1 != m.space().k())
    throw ConfigError("the grid has " + std::to_string(cfg.grid.dims()) + " spatial axes but the model has " +
                      std::to_string(m.space().k()) + " independent variables");
  if (t_end) cfg.t_end = *t_end;
  cfg.dt = dt;
  cfg.save_every = save_every;
  if (cfl) cfg.cfl = *cfl;
  if (diffusion_number) cfg.diffusion_number = *diffusion_number;

  std::map<std::string, std::string> init = entry->sim.initial;
  for (const auto& [k, v] : initial) init[k] = v;
  cfg.initial.clear();
  set_initial(cfg, init, params);

  if (z_profile) {
    if (lower_case(*z_profile) == "none")
      cfg.z_profile = {};
    else
      cfg.z_profile = SpaceTimeFunction::parse(*z_profile, cfg.grid.dims(), params);
  } else if (!entry->sim.z_profile.empty()) {
    cfg.z_profile = SpaceTimeFunction::parse(entry->sim.z_profile, cfg.grid.dims(), params);
  }
  return cfg;
}

RunConfig resolve(Ini ini, const Overrides& ov) {
  if (ov.model) {
    ini.erase_section("model");
    ini.set("model", "id", *ov.model);
  }
  for (const auto& [k, v] : ov.params) ini.set("params", k, v);
  if (ov.refine) ini.set("scheme", "refine", std::to_string(*ov.refine));

  RunConfig rc;
  apply_model_section(ini, rc);

  for (const auto& [key, v] : ini.section("grid")) {
    if (key == "points")
      rc.points = parse_vector<std::size_t>(v, [&](const std::string& s) { return parse_count(key, s); });
    else if (key == "lower")
      rc.lower = parse_vector<double>(v, parse_number);
    else if (key == "upper")
      rc.upper = parse_vector<double>(v, parse_number);
    else if (key == "boundary")
      try {
        rc.boundary = boundary_from_name(lower_case(v));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    else
      throw ConfigError("unknown [grid] key '" + key + "'");
  }

  for (const auto& [key, v] : ini.section("scheme")) {
    if (key == "t_end")
      rc.t_end = parse_number(v);
    else if (key == "dt")
      rc.dt = parse_number(v);
    else if (key == "save_every")
      rc.save_every = parse_count(key, v);
    else if (key == "cfl")
      rc.cfl = parse_number(v);
    else if (key == "diffusion_number")
      rc.diffusion_number = parse_number(v);
    else if (key == "z_profile")
      rc.z_profile = v;
    else if (key == "u_min")
      rc.u_min = parse_number(v);
    else if (key == "solver")
      rc.solver = lower_case(v);
    else if (key == "refine")
      rc.refine = parse_count(key, v);
    else
      throw ConfigError("unknown [scheme] key '" + key + "'");
  }
  if (rc.solver != "hddw" && rc.solver != "reconstructed" && rc.solver != "target")
    throw ConfigError("[scheme] solver must be hddw, reconstructed or target");
  if (rc.refine == 0) throw ConfigError("refinement levels must be at least 1");

  for (const auto& [key, v] : ini.section("initial")) rc.initial[key] = v;

  VerifyConfig& vc = rc.verify;
  for (const auto& [key, v] : ini.section("verify")) {
    if (key == "hddw_residual")
      vc.hddw_residual = parse_bool(key, v);
    else if (key == "dissipation")
      vc.dissipation = parse_bool(key, v);
    else if (key == "weighted_momentum")
      vc.weighted_momentum = parse_bool(key, v);
    else if (key == "cross_validate")
      vc.cross_validate = parse_bool(key, v);
    else if (key == "weighted_lambda")
      vc.weighted_lambda = parse_number(v);
    else if (key == "weighted_channel")
      vc.weighted_channel = v;
    else if (key.rfind("current_", 0) == 0)
      vc.current[key.substr(8)] = v;
    else if (key == "residual_tolerance")
      vc.residual_tolerance = parse_number(v);
    else if (key == "dissipation_tolerance")
      vc.dissipation_tolerance = parse_number(v);
    else if (key == "weighted_tolerance")
      vc.weighted_tolerance = parse_number(v);
    else if (key == "order_min")
      vc.order_min = parse_number(v);
    else if (key == "trajectory")
      vc.trajectory = v;
    else if (key == "seed")
      rc.seed = static_cast<std::uint64_t>(parse_count(key, v));
    else
      throw ConfigError("unknown [verify] key '" + key + "'");
  }

  if (auto dir = ini.get("output", "dir")) rc.out = *dir;
  if (ov.out) rc.out = *ov.out;

  // The output directory does not change results, so it stays out of the hash.
  Ini hashed = ini;
  hashed.erase_section("output");
  rc.canonical_text = hashed.canonical();
  rc.hash = fnv1a(rc.canonical_text);
  return rc;
}

}  // namespace kcontact::cli
