#include "trajectory_io.hpp"

#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#ifndef KCONTACT_VERSION
#define KCONTACT_VERSION "0.0.0"
#endif

namespace kcontact::cli {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string artifact_version() { return KCONTACT_VERSION; }

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  json j;
  j["artifact"] = "kcontact";
  j["version"] = artifact_version();
  j["command"] = m.command;
  j["model"] = m.model;
  j["config_hash"] = hex64(m.config_hash);
  j["scheme"] = {{"name", m.run.scheme},
                 {"dt", m.run.dt},
                 {"steps", m.run.steps},
                 {"save_every", m.run.save_every},
                 {"stability_number", m.run.stability_number}};
  j["seeds"] = {{"sampling", m.seed}};
  j["parameters"] = m.parameters;
  j["grid"] = {{"points", m.grid.points},
               {"lower", m.grid.lower},
               {"upper", m.grid.upper},
               {"boundary", std::string(boundary_name(m.grid.boundary))}};
  j["channels"] = m.channels;
  json snaps = json::array();
  for (const auto& [file, t] : m.snapshots) snaps.push_back({{"file", file}, {"time", t}});
  j["snapshots"] = std::move(snaps);
  j["outputs"] = m.outputs;

  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  f << std::setprecision(17) << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream f(path);
  if (!f) throw MissingTrajectory("missing trajectory: no manifest at " + path.string());
  json j;
  try {
    f >> j;
    Manifest m;
    m.command = j.value("command", "");
    m.model = j.value("model", "");
    m.config_hash = std::stoull(j.value("config_hash", std::string("0")), nullptr, 16);
    const auto& s = j.at("scheme");
    m.run.scheme = s.value("name", "");
    m.run.dt = s.value("dt", 0.0);
    m.run.steps = s.value("steps", std::size_t{0});
    m.run.save_every = s.value("save_every", std::size_t{0});
    m.run.stability_number = s.value("stability_number", 0.0);
    if (j.contains("seeds")) m.seed = j["seeds"].value("sampling", std::uint64_t{0});
    if (j.contains("parameters")) m.parameters = j["parameters"].get<std::map<std::string, double>>();
    const auto& g = j.at("grid");
    m.grid = Grid::box(g.at("points").get<std::vector<std::size_t>>(), g.at("lower").get<std::vector<double>>(),
                       g.at("upper").get<std::vector<double>>(),
                       boundary_from_name(g.value("boundary", std::string("periodic"))));
    m.channels = j.value("channels", std::vector<std::string>{});
    for (const auto& e : j.at("snapshots")) m.snapshots.emplace_back(e.at("file").get<std::string>(), e.at("time").get<double>());
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
  }
}

void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj, Manifest& m) {
  auto names = write_trajectory_csv(dir, traj);
  m.snapshots.clear();
  for (std::size_t s = 0; s < traj.size(); ++s) m.snapshots.emplace_back(names[s], traj[s].time());
  if (!traj.empty()) {
    m.grid = traj.grid();
    m.channels = traj[0].channel_names();
  }
  write_manifest(dir, m);
}

Trajectory load_trajectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw MissingTrajectory("missing trajectory: no directory " + dir.string());
  Manifest m = read_manifest(dir);
  Trajectory traj;
  for (const auto& [file, t] : m.snapshots) {
    std::ifstream f(dir / file);
    if (!f) throw MissingTrajectory("missing trajectory: snapshot " + (dir / file).string() + " not found");
    traj.snapshots.push_back(read_snapshot_csv(f, m.grid, t));
  }
  if (traj.empty()) throw MissingTrajectory("missing trajectory: " + dir.string() + " lists no snapshots");
  return traj;
}

}  // namespace kcontact::cli
