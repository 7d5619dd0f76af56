#include "grf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef GRF_SCENARIO_DIR
#define GRF_SCENARIO_DIR "scenarios"
#endif

namespace grf {

namespace {

std::size_t round_fraction(double fraction, int cadence) {
  return static_cast<std::size_t>(std::llround(fraction * cadence));
}

class IssueList {
 public:
  explicit IssueList(const std::string& text) : lines_(json_pointer_lines(text)) {}
  void add(const std::string& pointer, const std::string& message) {
    ConfigIssue is{pointer, message, 0};
    for (std::string p = pointer;; p = p.substr(0, p.rfind('/'))) {
      const auto it = lines_.find(p);
      if (it != lines_.end()) {
        is.line = it->second;
        break;
      }
      if (p.empty()) break;
    }
    issues_.push_back(std::move(is));
  }
  void raise() {
    if (!issues_.empty()) throw ConfigError(issues_);
  }

 private:
  std::map<std::string, int> lines_;
  std::vector<ConfigIssue> issues_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({ConfigIssue{"", "cannot open scenario file " + path, 0}});
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void parse_grid(Scenario& s, const Json& d, IssueList& issues) {
  const Json& geo = d["geometry"];
  s.dim = geo["dim"].get<int>();
  s.points = geo["points"].get<int>();
  s.side = geo["side"].get<double>();
  // the default of 3 means "every axis"
  s.varying_axes = std::min(geo["varying_axes"].get<int>(), s.dim);

  const Json& m = geo["metric"];
  s.metric = MetricFamily{parse_metric_kind(m["family"].get<std::string>()), m["amplitude"].get<double>(),
                          m["frequency"].get<int>(), s.seed, m["modes"].get<int>()};
  if (s.metric.kind == MetricKind::random_smooth && s.metric.amplitude * s.dim >= 1.0)
    issues.add("/geometry/metric/amplitude", "random-smooth metrics need dim * amplitude < 1 to stay SPD");

  const Json& h = geo["h"];
  s.h = FormFamily{parse_form_kind(h["family"].get<std::string>()), h["k"].get<double>(), h["epsilon"].get<double>(),
                   h["mode"].get<int>(), h["axis"].get<int>()};
  if (s.h.kind != FormKind::none && s.dim != 3) issues.add("/geometry/h/family", "a three-form needs dim 3");
  if (s.h.axis >= s.dim) issues.add("/geometry/h/axis", "axis must be below dim");
  if (s.h.kind == FormKind::single_mode && std::abs(s.h.epsilon) >= 1.0)
    issues.add("/geometry/h/epsilon", "|epsilon| must be below 1");

  const Json& heat = d["heat"];
  const Json& u0 = heat["u0"];
  s.u0 = ScalarFamily{parse_scalar_kind(u0["family"].get<std::string>()), u0["c"].get<double>(),
                      u0["epsilon"].get<double>(), u0["mode"].get<int>(), u0["axis"].get<int>()};
  if (s.u0.axis >= s.dim) issues.add("/heat/u0/axis", "axis must be below dim");
  if (s.u0.axis >= s.varying_axes) issues.add("/heat/u0/axis", "axis must be one of the varying axes");
  const Json& term = heat["terminal"];
  s.terminal.kind = parse_terminal_kind(term["family"].get<std::string>());
  s.terminal.width = term["width"].get<double>();

  const Json& ctl = d["control"];
  s.horizon = ctl["horizon"].get<double>();
  s.cfl = ctl["cfl"].get<double>();
  s.cadence = ctl["cadence"].get<int>();
  s.c_b = ctl["c_b"].get<double>();

  s.terminal_fraction = heat["terminal_time"].get<double>();
  const std::size_t kt = round_fraction(s.terminal_fraction, s.cadence);
  if (kt < 3 || kt >= static_cast<std::size_t>(s.cadence))
    issues.add("/heat/terminal_time", "T' must round to a snapshot strictly inside (0, horizon) with at least 3 before it");

  const Json& est = d["estimates"];
  for (std::size_t q = 0; q < est["liyau"].size(); ++q) {
    const Json& e = est["liyau"][q];
    const std::string ptr = "/estimates/liyau/" + std::to_string(q);
    LiYauParams p = LiYauParams::balanced(e["alpha"].get<double>());
    if (e.contains("a") && e.contains("b")) {
      p.a = e["a"].get<double>();
      p.b = e["b"].get<double>();
    } else if (e.contains("a")) {
      p.a = e["a"].get<double>();
      p.b = 0.5 * (1.0 / p.alpha - p.a);
    } else if (e.contains("b")) {
      p.b = e["b"].get<double>();
      p.a = 1.0 / p.alpha - 2.0 * p.b;
    }
    try {
      p.validate();
      s.liyau.push_back(p);
    } catch (const ParameterError& err) {
      issues.add(ptr, err.what());
    }
  }
  s.harnack_samples = est["harnack_samples"].get<int>();
  s.path_samples = est["path_samples"].get<int>();
  s.lemma = est["lemma"].get<bool>();

  const Json& fr = d["frequency"];
  s.frequency = fr["enabled"].get<bool>();
  s.eigenvalues = fr["eigenvalues"].get<bool>();
  s.window = {fr["window"][0].get<double>(), fr["window"][1].get<double>()};
  if (s.frequency) {
    if (s.u0.kind == ScalarKind::constant || s.u0.epsilon == 0.0)
      issues.add("/heat/u0", "the frequency functional needs a non-constant u0");
    const std::size_t k0 = round_fraction(s.window[0], s.cadence), k1 = round_fraction(s.window[1], s.cadence);
    if (k0 < 1 || k1 < k0 + 2 || k1 > kt)
      issues.add("/frequency/window",
                 "window must round to snapshots 0 < t0 < t1 <= T' with at least 3 snapshots");
    const double t0 = s.horizon * k0 / s.cadence, t1 = s.horizon * k1 / s.cadence;
    for (std::size_t q = 0; q < fr["h"].size(); ++q) {
      const Json& e = fr["h"][q];
      HFunction hf{parse_h_kind(e["family"].get<std::string>()), e["p"].get<double>(), e["q"].get<double>()};
      try {
        if (t0 > 0.0 && t1 > t0) hf.sign_on(t0, t1);
        s.h_functions.push_back(hf);
      } catch (const ParameterError& err) {
        issues.add("/frequency/h/" + std::to_string(q), err.what());
      }
    }
  }
}

void parse_homogeneous(Scenario& s, const Json& d, IssueList& issues) {
  const Json& hm = d["homogeneous"];
  const std::string structure = hm["structure"].get<std::string>();
  if (structure == "custom") {
    for (int i = 0; i < 3; ++i) s.milnor.lambda[i] = hm["lambda"][i].get<double>();
  } else {
    s.milnor.lambda = structure_preset(structure);
  }
  s.milnor.a = hm["metric"][0].get<double>();
  s.milnor.b = hm["metric"][1].get<double>();
  s.milnor.c = hm["metric"][2].get<double>();
  const Json& k = hm["k"];
  if (k.is_string()) {
    if (k.get<std::string>() != "bismut-flat") {
      issues.add("/homogeneous/k", "expected a number or \"bismut-flat\"");
    } else {
      s.bismut_flat = true;
      try {
        s.milnor.k = bismut_flat_k(s.milnor);
      } catch (const ParameterError& err) {
        issues.add("/homogeneous/k", err.what());
      }
    }
  } else {
    s.milnor.k = k.get<double>();
  }
  s.ode.tolerance = hm["tolerance"].get<double>();
  s.ode.max_step = hm["max_step"].get<double>();
  s.ode.output_interval = hm["output_interval"].get<double>();
  s.horizon = d["control"]["horizon"].get<double>();
  s.c_b = d["control"]["c_b"].get<double>();
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GridSpec Scenario::grid(int level) const {
  const int n = points << level;
  std::array<int, 3> pts{1, 1, 1};
  std::array<double, 3> sides{1.0, 1.0, 1.0};
  for (int a = 0; a < dim; ++a) {
    if (a < varying_axes) {
      pts[a] = n;
      sides[a] = side;
    } else {
      pts[a] = GridSpec::kMinPoints;
      sides[a] = GridSpec::kMinPoints * side / n;
    }
  }
  return GridSpec(dim, pts, sides);
}

StepControl Scenario::step_control(int level) const {
  StepControl c;
  c.cfl = cfl;
  c.cadence = cadence << level;
  return c;
}

double Scenario::terminal_time(int level) const {
  const int c = cadence << level;
  return horizon * static_cast<double>(round_fraction(terminal_fraction, c)) / c;
}

std::array<double, 2> Scenario::window_times(int level) const {
  const int c = cadence << level;
  return {horizon * static_cast<double>(round_fraction(window[0], c)) / c,
          horizon * static_cast<double>(round_fraction(window[1], c)) / c};
}

Scenario parse_scenario(const std::string& text, std::optional<std::uint64_t> seed) {
  Json raw = parse_json_text(text);
  if (seed && raw.is_object()) raw["seed"] = *seed;
  const Json doc = scenario_validator().validate(raw, text);

  Scenario s;
  s.document = doc;
  s.digest = fnv1a_hex(doc.dump());
  s.name = doc["name"].get<std::string>();
  s.description = doc["description"].get<std::string>();
  s.backend = doc["backend"].get<std::string>() == "grid" ? Backend::grid : Backend::homogeneous;
  s.seed = doc["seed"].get<std::uint64_t>();
  s.write_trajectory = doc["output"]["trajectory"].get<bool>();

  IssueList issues(text);
  if (s.backend == Backend::grid)
    parse_grid(s, doc, issues);
  else
    parse_homogeneous(s, doc, issues);
  issues.raise();
  return s;
}

std::string bundled_scenario_dir() {
  if (const char* env = std::getenv("GRF_SCENARIO_DIR")) return env;
  return GRF_SCENARIO_DIR;
}

std::vector<std::string> bundled_scenarios() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(bundled_scenario_dir(), ec))
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

Scenario load_scenario(const std::string& ref, std::optional<std::uint64_t> seed) {
  std::filesystem::path path(ref);
  if (!std::filesystem::exists(path)) {
    const std::filesystem::path bundled = std::filesystem::path(bundled_scenario_dir()) / (ref + ".json");
    if (!std::filesystem::exists(bundled))
      throw ConfigError({ConfigIssue{"", "no scenario file or bundled scenario named '" + ref + "'", 0}});
    path = bundled;
  }
  return parse_scenario(read_file(path.string()), seed);
}

}  // namespace grf
