#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grf/estimates.hpp"
#include "grf/frequency.hpp"
#include "grf/homogeneous.hpp"
#include "grf/initial_data.hpp"
#include "grf/schema.hpp"

namespace grf {

enum class Backend { grid, homogeneous };

/// A validated scenario document. Level L refines the grid backend by 2^L in
/// both the points per varying axis and the snapshot cadence.
struct Scenario {
  std::string name, description;
  Backend backend = Backend::grid;
  std::uint64_t seed = 1;
  Json document;       // with defaults applied
  std::string digest;  // FNV-1a 64 of the canonical document, hex

  // grid backend
  int dim = 2, points = 16, varying_axes = 3;
  double side = 1.0;
  MetricFamily metric;
  FormFamily h;
  ScalarFamily u0;
  TerminalFamily terminal;
  double terminal_fraction = 0.75;
  std::vector<LiYauParams> liyau;
  int harnack_samples = 50, path_samples = 33;
  bool lemma = true;
  bool frequency = true;
  std::vector<HFunction> h_functions;
  std::array<double, 2> window{0.25, 0.75};
  bool eigenvalues = true;
  double horizon = 0.02, cfl = 0.2, c_b = 10.0;
  int cadence = 64;
  bool write_trajectory = false;

  // homogeneous backend
  MilnorState milnor;
  bool bismut_flat = false;
  OdeControl ode;

  GridSpec grid(int level = 0) const;
  StepControl step_control(int level = 0) const;
  BudgetPolicy budget() const { return BudgetPolicy{c_b}; }
  /// T' and the frequency window, rounded to snapshots of the level.
  double terminal_time(int level = 0) const;
  std::array<double, 2> window_times(int level = 0) const;
};

/// Validates and interprets a scenario text; `seed` overrides the document's.
Scenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed = std::nullopt);

/// A bundled scenario name or a path to a JSON file.
Scenario load_scenario(const std::string& ref, std::optional<std::uint64_t> seed = std::nullopt);

std::string bundled_scenario_dir();
std::vector<std::string> bundled_scenarios();

std::string fnv1a_hex(const std::string& bytes);

}  // namespace grf
