#include "grf/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>

#include "grf/trajectory_io.hpp"

namespace grf {

namespace {

Verdict worst(Verdict a, Verdict b) { return static_cast<int>(a) >= static_cast<int>(b) ? a : b; }

std::string series_csv(const TimeSeries& s, const std::string& column) {
  std::ostringstream os;
  os << "t," << column << '\n';
  for (std::size_t k = 0; k < s.size(); ++k) os << format_double(s.times[k]) << ',' << format_double(s.values[k]) << '\n';
  return os.str();
}

std::string estimate_csv(const EstimateReport& r) {
  std::ostringstream os;
  write_series_csv(os, r);
  return os.str();
}

/// A residual with a hard ceiling; exceeding it is a violation.
Json threshold_check(const std::string& name, double value, double threshold, Verdict& overall) {
  const Verdict v = value <= threshold ? Verdict::pass : Verdict::violated;
  overall = worst(overall, v);
  return {{"check", name}, {"value", value}, {"threshold", threshold}, {"verdict", to_string(v)}};
}

Json residual_entry(const std::string& name, const TimeSeries& s) {
  return {{"check", name}, {"sup", s.sup()}, {"samples", s.size()}};
}

Json bounds_json(const CurvatureBounds& kb) {
  return {{"K1", kb.K1}, {"K2", kb.K2}, {"K3", kb.K3}, {"K4", kb.K4}, {"K", kb.K()}};
}

Json trajectory_meta(const Trajectory& traj, const StepControl& ctrl) {
  double dt_max = 0.0;
  long substeps = 0;
  for (std::size_t k = 0; k < traj.step_sizes().size(); ++k) {
    dt_max = std::max(dt_max, traj.step_sizes()[k]);
    substeps += traj.substeps()[k];
  }
  return {{"grid", grid_to_json(traj.grid())},
          {"horizon", traj.horizon()},
          {"snapshots", traj.size()},
          {"cadence", ctrl.cadence},
          {"cfl", ctrl.cfl},
          {"internal_steps", substeps},
          {"max_internal_step", dt_max},
          {"has_h", traj.has_h()}};
}

Json hfunction_json(const HFunction& h) {
  const char* kind = h.kind == HKind::constant ? "constant" : h.kind == HKind::linear ? "linear" : "exponential";
  return {{"family", kind}, {"p", h.p}, {"q", h.q}};
}

double max_abs_h(const Trajectory& traj) {
  double m = 0.0;
  for (const FlowState& st : traj.states())
    if (st.h) m = std::max(m, st.h->coefficient.values.cwiseAbs().maxCoeff());
  return m;
}

struct GridSetup {
  StepControl ctrl;
  std::shared_ptr<const Trajectory> traj;
  ScalarField u0;
};

GridSetup evolve_scenario(const Scenario& s, int level) {
  const GridSpec grid = s.grid(level);
  GridSetup out;
  out.ctrl = s.step_control(level);
  const MetricField g = make_metric(grid, s.metric, s.varying_axes);
  const auto h = make_form(grid, s.h);
  out.traj = std::make_shared<const Trajectory>(evolve(FlowState(g, h, 0.0), s.horizon, out.ctrl));
  out.u0 = make_scalar(grid, s.u0);
  return out;
}

ConjugateSolution conjugate_for(const Scenario& s, const GridSetup& gs, int level) {
  const ScalarField terminal = make_terminal_profile(gs.traj->grid(), s.terminal, s.varying_axes);
  return solve_conjugate(gs.traj, terminal, s.terminal_time(level));
}

RunReport run_grid(const Scenario& s, int level) {
  RunReport out;
  Verdict overall = Verdict::pass;
  const BudgetPolicy policy = s.budget();
  const GridSetup gs = evolve_scenario(s, level);
  const Trajectory& traj = *gs.traj;
  const int n = traj.dim();
  const CurvatureBounds kb = curvature_bounds(traj);
  const ScalarEvolution u = solve_heat(gs.traj, gs.u0);

  Json estimates = Json::array();
  auto add_estimate = [&](const EstimateReport& r, const std::string& file, Json extra) {
    Json j = report_to_json(r);
    for (auto& [k, v] : extra.items()) j[k] = v;
    j["series"] = file;
    estimates.push_back(std::move(j));
    out.files[file] = estimate_csv(r);
    overall = worst(overall, r.verdict);
  };
  for (std::size_t q = 0; q < s.liyau.size(); ++q) {
    const LiYauParams& p = s.liyau[q];
    const LiYauConstants c = liyau_constants(n, p, kb);
    const Json params = {{"alpha", p.alpha}, {"a", p.a}, {"b", p.b}};
    add_estimate(liyau_check(u, p, kb, policy), "series/liyau_" + std::to_string(q) + ".csv",
                 {{"params", params}, {"constants", {{"B1", c.B1}, {"B2", c.B2}, {"B3", c.B3}}}});
  }
  add_estimate(hamilton_check(u, policy), "series/hamilton.csv", Json::object());
  if (s.harnack_samples > 0)
    for (std::size_t q = 0; q < s.liyau.size(); ++q) {
      const LiYauParams& p = s.liyau[q];
      add_estimate(harnack_sampled(u, p, kb, s.harnack_samples, s.seed, policy, s.path_samples),
                   "series/harnack_" + std::to_string(q) + ".csv",
                   {{"params", {{"alpha", p.alpha}, {"a", p.a}, {"b", p.b}}}});
    }

  Json residuals = Json::array();
  Json checks = Json::array();
  if (s.lemma)
    for (std::size_t q = 0; q < s.liyau.size(); ++q) {
      const TimeSeries r = lemma_residual(u, s.liyau[q].alpha);
      const std::string file = "series/lemma_" + std::to_string(q) + ".csv";
      Json j = residual_entry("lemma_residual", r);
      j["alpha"] = s.liyau[q].alpha;
      j["series"] = file;
      residuals.push_back(std::move(j));
      out.files[file] = series_csv(r, "residual");
    }
  {
    const TimeSeries r = volume_evolution_residual(traj);
    Json j = residual_entry("volume_evolution_residual", r);
    j["series"] = "series/volume_residual.csv";
    residuals.push_back(std::move(j));
    out.files["series/volume_residual.csv"] = series_csv(r, "residual");
  }
  if (traj.has_h() && traj[0].h->coefficient.values.cwiseAbs().maxCoeff() == 0.0)
    checks.push_back(threshold_check("h_zero_preserved", max_abs_h(traj), 0.0, overall));

  const ConjugateSolution conj = conjugate_for(s, gs, level);
  const WeightedMeasure mu = weighted_measure(conj.kernel);
  {
    TimeSeries mass{std::vector<double>(traj.times().begin(), traj.times().begin() + mu.size()), mu.mass};
    out.files["series/mass.csv"] = series_csv(mass, "mass");
    checks.push_back(threshold_check("conjugate_mass", mu.max_mass_drift(), 1e-6, overall));
    const TimeSeries mr = measure_evolution_residual(mu, conj.kernel);
    Json j = residual_entry("measure_evolution_residual", mr);
    j["series"] = "series/measure_residual.csv";
    residuals.push_back(std::move(j));
    out.files["series/measure_residual.csv"] = series_csv(mr, "residual");
    const TimeSeries dr = duality_residual(u, conj.kernel);
    j = residual_entry("duality_residual", dr);
    j["series"] = "series/duality_residual.csv";
    residuals.push_back(std::move(j));
    out.files["series/duality_residual.csv"] = series_csv(dr, "residual");
  }

  Json frequency = Json::array();
  if (s.frequency) {
    const auto [t0, t1] = s.window_times(level);
    const FrequencyConstants fc = frequency_constants(n, kb, gs.u0);
    TimeSeries lambda;
    if (s.eigenvalues) lambda = eigenvalue_series(mu, FrequencyParams{s.h_functions.front(), t0, t1});
    for (std::size_t q = 0; q < s.h_functions.size(); ++q) {
      const FrequencyParams fp{s.h_functions[q], t0, t1};
      FrequencySeries fs = compute_series(u, mu, fp, fc, false);
      if (s.eigenvalues) fs.lambda_M = lambda.values;
      const std::string tag = std::to_string(q);
      std::ostringstream csv;
      write_frequency_csv(csv, fs);
      out.files["series/frequency_" + tag + ".csv"] = csv.str();

      Json entry = {{"h", hfunction_json(fp.h)},
                    {"window", {t0, t1}},
                    {"constants", {{"C1", fc.C1}, {"C2", fc.C2}, {"C3", fc.C3}, {"A", fc.A}, {"kappa", fc.kappa}}},
                    {"series", "series/frequency_" + tag + ".csv"}};
      Json fchecks = Json::array();
      auto add = [&](const EstimateReport& r, const std::string& file, bool advisory) {
        Json j = report_to_json(r);
        j["series"] = file;
        j["advisory"] = advisory;
        out.files[file] = estimate_csv(r);
        if (!advisory) overall = worst(overall, r.verdict);
        fchecks.push_back(std::move(j));
      };
      add(monotonicity_check(fs, fp, policy), "series/frequency_monotonicity_" + tag + ".csv", false);
      add(integral_harnack_check(fs, policy), "series/integral_harnack_" + tag + ".csv", false);
      if (s.eigenvalues)
        add(eigenvalue_monotonicity(fs, fp, policy), "series/eigenvalue_monotonicity_" + tag + ".csv", true);
      entry["checks"] = std::move(fchecks);
      const TimeSeries ip = i_prime_identity(fs);
      Json ipj = residual_entry("i_prime_identity", ip);
      ipj["series"] = "series/i_prime_" + tag + ".csv";
      out.files["series/i_prime_" + tag + ".csv"] = series_csv(ip, "residual");
      entry["i_prime_identity"] = std::move(ipj);
      frequency.push_back(std::move(entry));
    }
  }

  Json traj_meta = trajectory_meta(traj, gs.ctrl);
  traj_meta["terminal_time"] = conj.terminal_time;
  traj_meta["h_sup"] = max_abs_h(traj);
  out.json = {{"bounds", bounds_json(kb)}, {"estimates", std::move(estimates)},
              {"residuals", std::move(residuals)}, {"checks", std::move(checks)},
              {"frequency", std::move(frequency)}, {"trajectory", std::move(traj_meta)}};
  if (s.write_trajectory) out.files["trajectory.json"] = to_json_string(trajectory_to_json(traj)) + "\n";
  out.overall = overall;
  return out;
}

RunReport run_homogeneous(const Scenario& s) {
  RunReport out;
  Verdict overall = Verdict::pass;
  const HomogeneousRun run = evolve_ode(s.milnor, s.horizon, s.ode);
  const HomogeneousReport rep = homogeneous_reports(run);
  Json checks = Json::array();
  checks.push_back(threshold_check("volume_identity", rep.volume_residual, 1e-8, overall));
  checks.push_back(threshold_check("trace_identity", rep.trace_identity, 1e-10, overall));
  checks.push_back(threshold_check("k_constant", rep.k_change, 0.0, overall));
  if (s.bismut_flat) {
    checks.push_back(threshold_check("fixed_point_rhs", rep.rhs_norm_max, 1e-10, overall));
    checks.push_back(threshold_check("fixed_point_drift", rep.drift, 1e-8, overall));
  }
  std::ostringstream csv;
  csv << "t,a,b,c,k,log_volume\n";
  for (std::size_t q = 0; q < run.states.size(); ++q) {
    const MilnorState& m = run.states[q];
    csv << format_double(m.t) << ',' << format_double(m.a) << ',' << format_double(m.b) << ','
        << format_double(m.c) << ',' << format_double(m.k) << ',' << format_double(run.log_volume[q]) << '\n';
  }
  out.files["series/homogeneous.csv"] = csv.str();
  if (s.write_trajectory) out.files["trajectory.json"] = to_json_string(homogeneous_run_to_json(run)) + "\n";
  out.json = {{"bounds", bounds_json(rep.bounds)},
              {"homogeneous", homogeneous_report_to_json(rep)},
              {"checks", std::move(checks)},
              {"trajectory",
               {{"horizon", s.horizon},
                {"snapshots", run.states.size()},
                {"steps", run.steps},
                {"rejected", run.rejected},
                {"k", s.milnor.k},
                {"lambda", s.milnor.lambda}}}};
  out.overall = overall;
  return out;
}

double sup_or_zero(const TimeSeries& s) { return s.size() ? s.sup() : 0.0; }

}  // namespace

RunReport run_scenario(const Scenario& s, int level) {
  if (level < 0) throw ParameterError("refinement level must be non-negative");
  RunReport r = s.backend == Backend::grid ? run_grid(s, level) : run_homogeneous(s);
  r.json["format"] = "grf-run-report";
  r.json["scenario"] = {{"name", s.name},
                        {"digest", s.digest},
                        {"backend", s.backend == Backend::grid ? "grid" : "homogeneous"},
                        {"seed", s.seed},
                        {"level", level}};
  r.json["overall"] = to_string(r.overall);
  return r;
}

void write_run(const RunReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto put = [&](const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot write " + path.string());
    os << bytes;
  };
  put(fs::path(dir) / "report.json", to_json_string(r.json) + "\n");
  for (const auto& [name, bytes] : r.files) put(fs::path(dir) / name, bytes);
}

bool ConvergenceTable::passed() const {
  if (completed < 2) return false;
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return r.passed(); });
}

ConvergenceTable refine(const Scenario& s, int levels) {
  if (levels < 2) throw ParameterError("refine needs at least 2 levels");
  ConvergenceTable t;
  t.scenario = s.name;
  t.digest = s.digest;
  t.levels = levels;

  if (s.backend == Backend::homogeneous) {
    // no spatial grid: every level is the same ODE run
    const HomogeneousReport rep = homogeneous_reports(evolve_ode(s.milnor, s.horizon, s.ode));
    ConvergenceRow vol, tr;
    vol.name = "volume_evolution_residual";
    tr.name = "trace_identity";
    for (int L = 0; L < levels; ++L) {
      vol.spacing.push_back(0.0);
      vol.values.push_back(rep.volume_residual);
      tr.spacing.push_back(0.0);
      tr.values.push_back(rep.trace_identity);
    }
    vol.exact = tr.exact = true;
    t.rows = {vol, tr};
    t.completed = levels;
    t.warnings.push_back("homogeneous backend has no spatial discretization; residuals sit at integrator tolerance");
    return t;
  }

  std::map<std::string, ConvergenceRow> rows;
  std::vector<std::string> order;
  auto record = [&](const std::string& name, double h, double v) {
    if (!rows.count(name)) {
      rows[name].name = name;
      order.push_back(name);
    }
    rows[name].spacing.push_back(h);
    rows[name].values.push_back(v);
  };
  for (int L = 0; L < levels; ++L) {
    try {
      const GridSetup gs = evolve_scenario(s, L);
      const double h = gs.traj->grid().max_spacing();
      const ScalarEvolution u = solve_heat(gs.traj, gs.u0);
      if (s.lemma) record("lemma_residual", h, sup_or_zero(lemma_residual(u, s.liyau.front().alpha)));
      record("volume_evolution_residual", h, sup_or_zero(volume_evolution_residual(*gs.traj)));
      record("hamilton_budget", h, hamilton_check(u, s.budget()).budget);
      const ConjugateSolution conj = conjugate_for(s, gs, L);
      const WeightedMeasure mu = weighted_measure(conj.kernel);
      record("measure_evolution_residual", h, sup_or_zero(measure_evolution_residual(mu, conj.kernel)));
      if (s.frequency) {
        const auto [t0, t1] = s.window_times(L);
        const FrequencyParams fp{s.h_functions.front(), t0, t1};
        const FrequencySeries fs =
            compute_series(u, mu, fp, frequency_constants(gs.traj->dim(), curvature_bounds(*gs.traj), gs.u0), false);
        record("i_prime_identity", h, sup_or_zero(i_prime_identity(fs)));
      }
      t.completed = L + 1;
    } catch (const std::bad_alloc&) {
      t.warnings.push_back("level " + std::to_string(L) + " exceeded available memory; table is partial");
      break;
    } catch (const NumericalError& e) {
      t.warnings.push_back("level " + std::to_string(L) + " failed: " + e.what() + "; table is partial");
      break;
    }
  }
  for (const std::string& name : order) {
    ConvergenceRow r = rows[name];
    r.spacing.resize(t.completed);
    r.values.resize(t.completed);
    const double vmax = r.values.empty() ? 0.0 : *std::max_element(r.values.begin(), r.values.end());
    if (vmax < 1e-10) {
      r.exact = true;  // identity holds at round-off on every level
    } else if (t.completed >= 2) {
      r.slope = log_log_slope(r.spacing, r.values);
    }
    t.rows.push_back(std::move(r));
  }
  if (t.completed < 2) t.warnings.push_back("fewer than 2 levels completed; no slopes");
  return t;
}

Json table_to_json(const ConvergenceTable& t) {
  Json rows = Json::array();
  for (const ConvergenceRow& r : t.rows)
    rows.push_back({{"check", r.name},
                    {"spacing", r.spacing},
                    {"values", r.values},
                    {"slope", r.slope},
                    {"required", r.required},
                    {"exact", r.exact},
                    {"passed", r.passed()}});
  return {{"format", "grf-convergence-table"},
          {"scenario", t.scenario},
          {"digest", t.digest},
          {"levels", t.levels},
          {"completed", t.completed},
          {"rows", std::move(rows)},
          {"warnings", t.warnings},
          {"passed", t.passed()}};
}

std::string table_to_csv(const ConvergenceTable& t) {
  std::ostringstream os;
  os << "check,level,spacing,value,slope,exact\n";
  for (const ConvergenceRow& r : t.rows)
    for (std::size_t L = 0; L < r.values.size(); ++L)
      os << r.name << ',' << L << ',' << format_double(r.spacing[L]) << ',' << format_double(r.values[L]) << ','
         << format_double(r.slope) << ',' << (r.exact ? 1 : 0) << '\n';
  return os.str();
}

Json export_trajectory(const Scenario& s, int level) {
  if (s.backend == Backend::homogeneous) return homogeneous_run_to_json(evolve_ode(s.milnor, s.horizon, s.ode));
  return trajectory_to_json(*evolve_scenario(s, level).traj);
}

}  // namespace grf
