#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kcontact/catalog.hpp"

namespace kcontact::cli {

/// Bad or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sectioned key/value text, in file order.
class Ini {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };

  static Ini read(const std::filesystem::path& path);
  static Ini parse(const std::string& text);

  /// Replaces an existing key or appends it.
  void set(const std::string& section, const std::string& key, const std::string& value);
  void erase_section(const std::string& section);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  /// Entries of one section, in order.
  std::vector<std::pair<std::string, std::string>> section(const std::string& name) const;
  bool has_section(const std::string& name) const;
  /// Normalized text: one "[section] key = value" line per entry.
  std::string canonical() const;

 private:
  std::vector<Entry> entries_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

struct VerifyConfig {
  bool hddw_residual = true;
  bool dissipation = true;
  bool weighted_momentum = false;
  bool cross_validate = false;
  double weighted_lambda = 0.0;
  std::string weighted_channel = "p_t";
  /// Extra current given as F^a text keyed by independent variable name.
  std::map<std::string, std::string> current;
  double residual_tolerance = 1e-2;
  double dissipation_tolerance = 1e-2;
  double weighted_tolerance = 1e-3;
  double order_min = 1.9;
  /// Load this trajectory directory instead of running.
  std::string trajectory;
};

/// Everything a command needs, resolved from the config file and flags.
struct RunConfig {
  /// Owns the model definition: a catalog copy or an inline entry.
  std::shared_ptr<ModelEntry> entry;
  bool inline_model = false;
  ParamOverrides params;
  Macros macros;

  std::optional<std::vector<std::size_t>> points;
  std::optional<std::vector<double>> lower;
  std::optional<std::vector<double>> upper;
  std::optional<Boundary> boundary;
  std::optional<double> t_end;
  double dt = 0.0;
  std::size_t save_every = 0;
  std::optional<double> cfl;
  std::optional<double> diffusion_number;
  /// "none" disables a catalog profile.
  std::optional<std::string> z_profile;
  double u_min = 1e-3;
  /// "hddw" (first-order system), "reconstructed" or "target" (direct solver).
  std::string solver = "hddw";
  std::map<std::string, std::string> initial;

  VerifyConfig verify;
  std::filesystem::path out;
  std::size_t refine = 1;
  std::uint64_t seed = 20240611;

  std::string canonical_text;
  std::uint64_t hash = 0;

  Model model() const;
  SimConfig sim(const Model& m) const;
};

struct Overrides {
  std::optional<std::string> model;
  std::map<std::string, std::string> params;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> refine;
};

/// Resolves a config (possibly empty) plus command line overrides.
RunConfig resolve(Ini ini, const Overrides& overrides);

std::vector<std::string> split_list(const std::string& text);
/// Numeric value; accepts expressions in pi such as "2*pi".
double parse_number(const std::string& text);

}  // namespace kcontact::cli
