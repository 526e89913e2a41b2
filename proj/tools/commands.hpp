#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace kcontact::cli {

int cmd_list_models(bool with_candidates, std::ostream& out);
int cmd_derive(const RunConfig& rc, std::ostream& out);
int cmd_classify(const RunConfig& rc, std::ostream& out);
int cmd_simulate(const RunConfig& rc, std::ostream& out);
int cmd_verify(const RunConfig& rc, std::ostream& out);

/// One run of a refinement study.
struct LevelRun {
  Trajectory traj;
  RunInfo info;
  double dx = 0.0;
};

/// Runs `levels` successively refined copies of `sim`. Each level halves dx
/// and divides dt by 2 (hyperbolic) or 4 (parabolic). With `same_times` the
/// save stride grows with the step count so all levels save at the same
/// times; otherwise the stride in steps stays fixed.
std::vector<LevelRun> run_levels(const RunConfig& rc, const Model& m, const SimConfig& sim, std::size_t levels,
                                 bool same_times);

/// Max difference of the listed channels between a run and its refinement,
/// over snapshots and the coarse nodes shared by both grids.
double level_difference(const Trajectory& coarse, const Trajectory& fine, const std::vector<std::string>& channels);

/// Six significant digits, for human-readable reports.
std::string num(double v);

}  // namespace kcontact::cli
