// grflab: scenario-driven runs, refinement studies and trajectory export.
//
// Exit codes: 0 pass or inconclusive, 1 configuration error, 2 an estimate
// was violated (or a refinement slope missed its target), 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "grf/parallel.hpp"
#include "grf/runner.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitViolated = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  int level = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_level) {
  cmd->add_option("--config", c.config, "bundled scenario name or path to a scenario JSON file")->required();
  cmd->add_option("--out", c.out, "output directory (default out/<scenario>)");
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  if (with_level) cmd->add_option("--level", c.level, "refinement level")->check(CLI::NonNegativeNumber);
}

std::string out_dir(const Common& c, const grf::Scenario& s) { return c.out.empty() ? "out/" + s.name : c.out; }

int exit_for(grf::Verdict v) { return v == grf::Verdict::violated ? kExitViolated : 0; }

int cmd_run(const Common& c) {
  const grf::Scenario s = grf::load_scenario(c.config, c.seed);
  const grf::RunReport r = grf::run_scenario(s, c.level);
  const std::string dir = out_dir(c, s);
  grf::write_run(r, dir);
  for (const char* group : {"estimates", "checks"})
    if (r.json.contains(group))
      for (const auto& e : r.json[group])
        std::cout << e["check"].get<std::string>() << ": " << e["verdict"].get<std::string>() << '\n';
  if (r.json.contains("frequency"))
    for (const auto& f : r.json["frequency"])
      for (const auto& e : f["checks"])
        std::cout << e["check"].get<std::string>() << (e["advisory"].get<bool>() ? " (advisory)" : "") << ": "
                  << e["verdict"].get<std::string>() << '\n';
  std::cout << "overall: " << grf::to_string(r.overall) << "\nreport: " << dir << "/report.json\n";
  return exit_for(r.overall);
}

int cmd_refine(const Common& c, int levels) {
  const grf::Scenario s = grf::load_scenario(c.config, c.seed);
  const grf::ConvergenceTable t = grf::refine(s, levels);
  const std::string dir = out_dir(c, s);
  std::filesystem::create_directories(dir);
  std::ofstream(dir + "/refine.json", std::ios::binary) << grf::to_json_string(grf::table_to_json(t)) << '\n';
  std::ofstream(dir + "/refine.csv", std::ios::binary) << grf::table_to_csv(t);
  for (const auto& row : t.rows) {
    std::cout << row.name << ":";
    for (double v : row.values) std::cout << ' ' << grf::format_double(v);
    if (row.exact)
      std::cout << "  exact";
    else
      std::cout << "  slope " << grf::format_double(row.slope);
    std::cout << (row.passed() ? "  ok" : "  below target") << '\n';
  }
  for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
  return t.passed() ? 0 : kExitViolated;
}

int cmd_export(const Common& c) {
  const grf::Scenario s = grf::load_scenario(c.config, c.seed);
  const std::string dir = out_dir(c, s);
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/trajectory.json";
  std::ofstream(path, std::ios::binary) << grf::to_json_string(grf::export_trajectory(s, c.level)) << '\n';
  std::cout << path << '\n';
  return 0;
}

int cmd_list() {
  for (const std::string& name : grf::bundled_scenarios()) {
    std::string desc;
    try {
      desc = grf::load_scenario(name).description;
    } catch (const std::exception& e) {
      desc = std::string("(invalid: ") + e.what() + ")";
    }
    std::cout << name << (desc.empty() ? "" : "  " + desc) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generalized Ricci flow laboratory"};
  app.require_subcommand(1);
  Common run_opts, refine_opts, export_opts;
  int levels = 3;
  CLI::App* run = app.add_subcommand("run", "run every check of a scenario and write report.json");
  add_common(run, run_opts, true);
  CLI::App* ref = app.add_subcommand("refine", "halve spacing and step per level and fit convergence slopes");
  add_common(ref, refine_opts, false);
  ref->add_option("--level,--levels", levels, "number of levels (>= 2)")->check(CLI::Range(2, 8));
  CLI::App* exp = app.add_subcommand("export-trajectory", "evolve the flow and write trajectory.json");
  add_common(exp, export_opts, true);
  app.add_subcommand("list-scenarios", "list bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      grf::set_threads(run_opts.threads);
      return cmd_run(run_opts);
    }
    if (*ref) {
      grf::set_threads(refine_opts.threads);
      return cmd_refine(refine_opts, levels);
    }
    if (*exp) {
      grf::set_threads(export_opts.threads);
      return cmd_export(export_opts);
    }
    return cmd_list();
  } catch (const grf::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    // ConfigError, ParameterError and ShapeError
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
