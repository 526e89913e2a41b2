#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <ostream>

#include "commands.hpp"
#include "config.hpp"
#include "trajectory_io.hpp"

namespace kcontact::cli {

namespace {

struct Flags {
  std::string config;
  std::string model;
  std::string positional;
  std::string out;
  std::size_t refine = 0;
  std::vector<std::string> params;
  bool candidates = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("model_id", f.positional, "Catalog model id (same as --model)");
  sub->add_option("--config,-c", f.config, "INI configuration file");
  sub->add_option("--model,-m", f.model, "Catalog model id; replaces the config's [model] section");
  sub->add_option("--param,-p", f.params, "Parameter override name=value (repeatable)")->take_all();
}

RunConfig resolve_flags(const Flags& f) {
  Ini ini = f.config.empty() ? Ini{} : Ini::read(f.config);
  Overrides ov;
  if (!f.model.empty() && !f.positional.empty() && f.model != f.positional)
    throw ConfigError("model given twice: '" + f.positional + "' and --model '" + f.model + "'");
  if (!f.model.empty()) ov.model = f.model;
  if (!f.positional.empty()) ov.model = f.positional;
  for (const auto& p : f.params) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects name=value, got '" + p + "'");
    ov.params[p.substr(0, eq)] = p.substr(eq + 1);
  }
  if (!f.out.empty()) ov.out = f.out;
  if (f.refine > 0) ov.refine = f.refine;
  return resolve(std::move(ini), ov);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"k-contact Hamiltonian field theory: derivation, classification, simulation and verification",
               "kcontact"};
  app.require_subcommand(1);
  Flags f;

  auto* derive = app.add_subcommand("derive", "Print the HdDW equations and the reconstructed second-order PDE");
  add_common(derive, f);
  auto* classify = app.add_subcommand("classify", "Classify the second-order equation at the model's default point");
  add_common(classify, f);
  auto* simulate = app.add_subcommand("simulate", "Integrate in time and write snapshots and a manifest");
  add_common(simulate, f);
  simulate->add_option("--out,-o", f.out, "Output directory");
  simulate->add_option("--refine,-r", f.refine, "Number of refinement levels for a self-convergence study");
  auto* verify = app.add_subcommand("verify", "Check HdDW residuals, dissipation laws and configured oracles");
  add_common(verify, f);
  verify->add_option("--out,-o", f.out, "Output directory for residual tables");
  verify->add_option("--refine,-r", f.refine, "Number of refinement levels; orders are fitted across them");
  auto* list = app.add_subcommand("list-models", "List the catalog");
  list->add_flag("--candidates", f.candidates, "Also list unverified candidate Hamiltonians");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'kcontact --help' for usage\n";
    return kUsage;
  }

  try {
    if (list->parsed()) return cmd_list_models(f.candidates, out);
    RunConfig rc = resolve_flags(f);
    if (derive->parsed()) return cmd_derive(rc, out);
    if (classify->parsed()) return cmd_classify(rc, out);
    if (simulate->parsed()) return cmd_simulate(rc, out);
    if (verify->parsed()) return cmd_verify(rc, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingTrajectory& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainRestrictionError& e) {
    err << "refused: " << e.what() << "\n";
    return kRuntime;
  } catch (const InstabilityError& e) {
    err << "unstable run: " << e.what() << "\n";
    return kRuntime;
  } catch (const SimulationError& e) {
    err << "simulation error: " << e.what() << "\n";
    return kRuntime;
  } catch (const SingularityError& e) {
    err << "singular momentum Hessian: " << e.what() << "\n";
    return kRuntime;
  } catch (const ParseError& e) {
    err << "expression error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace kcontact::cli
