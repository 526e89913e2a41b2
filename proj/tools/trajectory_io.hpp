#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kcontact/sim.hpp"

namespace kcontact::cli {

/// A trajectory directory or one of its files is absent.
class MissingTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run record written next to the snapshots as manifest.json.
struct Manifest {
  std::string command;
  std::string model;
  std::uint64_t config_hash = 0;
  RunInfo run;
  std::uint64_t seed = 0;
  std::map<std::string, double> parameters;
  Grid grid;
  std::vector<std::string> channels;
  std::vector<std::pair<std::string, double>> snapshots;  // file, time
  /// Other files written by the command.
  std::vector<std::string> outputs;
};

std::string hex64(std::uint64_t v);
std::string artifact_version();

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

/// Writes the snapshots, records them in `m` and writes the manifest.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj, Manifest& m);
/// Reads a directory written by save_trajectory.
Trajectory load_trajectory(const std::filesystem::path& dir);

}  // namespace kcontact::cli
