#pragma once

#include <map>
#include <string>
#include <vector>

#include "grf/scenario.hpp"

namespace grf {

/// Outcome of one run. `files` maps paths relative to the output directory
/// (series/*.csv, optionally trajectory.json) to their exact bytes.
struct RunReport {
  Json json;
  Verdict overall = Verdict::pass;
  std::map<std::string, std::string> files;
};

/// Runs every check the scenario enables at refinement level `level`.
/// Numerical failures (SingularityError, InstabilityError, SolverError) propagate.
RunReport run_scenario(const Scenario& s, int level = 0);

/// Writes report.json and the member files under dir, creating it.
void write_run(const RunReport& r, const std::string& dir);

struct ConvergenceRow {
  std::string name;
  std::vector<double> spacing;  // largest grid spacing per level
  std::vector<double> values;   // sup-norm residual per level
  double slope = 0.0;           // least-squares slope of log value against log spacing
  double required = 1.9;
  bool exact = false;           // homogeneous backend: no spatial discretization
  bool passed() const { return exact || slope >= required; }
};

struct ConvergenceTable {
  std::string scenario, digest;
  int levels = 0, completed = 0;
  std::vector<ConvergenceRow> rows;
  std::vector<std::string> warnings;
  bool passed() const;
};

/// Reruns the residual checks at halved spacing and step per level.
/// A level that runs out of memory or fails numerically ends the table early
/// with a warning instead of discarding the completed levels.
ConvergenceTable refine(const Scenario& s, int levels = 3);

Json table_to_json(const ConvergenceTable& t);
std::string table_to_csv(const ConvergenceTable& t);

/// The flow trajectory (grid) or ODE run (homogeneous) of the scenario.
Json export_trajectory(const Scenario& s, int level = 0);

}  // namespace grf
