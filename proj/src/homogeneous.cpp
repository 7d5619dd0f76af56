#include "grf/homogeneous.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace grf {

void MilnorState::validate() const {
  for (double v : {a, b, c})
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError("Milnor metric coefficients must be positive");
  for (double v : lambda)
    if (!std::isfinite(v)) throw ParameterError("structure constants must be finite");
  if (!std::isfinite(k) || !std::isfinite(t)) throw ParameterError("three-form coefficient and time must be finite");
}

std::array<double, 3> structure_preset(const std::string& name) {
  if (name == "su2") return {2.0, 2.0, 2.0};
  if (name == "heisenberg") return {2.0, 0.0, 0.0};
  if (name == "abelian") return {0.0, 0.0, 0.0};
  throw ParameterError("unknown structure-constant preset '" + name + "'");
}

std::array<double, 3> milnor_ricci(const MilnorState& s) {
  const std::array<double, 3> g = s.metric();
  std::array<double, 3> mu{}, nu{}, r{};
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    mu[i] = s.lambda[i] * std::sqrt(g[i] / (g[j] * g[k]));
  }
  const double half = 0.5 * (mu[0] + mu[1] + mu[2]);
  for (int i = 0; i < 3; ++i) nu[i] = half - mu[i];
  // Ric(f_i, f_i) = 2 nu_j nu_k in the orthonormal frame f_i = e_i / sqrt(g_i)
  for (int i = 0; i < 3; ++i) r[i] = g[i] * 2.0 * nu[(i + 1) % 3] * nu[(i + 2) % 3];
  return r;
}

double milnor_scalar_curvature(const MilnorState& s) {
  const auto r = milnor_ricci(s);
  return r[0] / s.a + r[1] / s.b + r[2] / s.c;
}

std::array<double, 3> milnor_h_sq(const MilnorState& s) {
  const double k2 = s.k * s.k;
  return {k2 / (s.b * s.c), k2 / (s.a * s.c), k2 / (s.a * s.b)};
}

double milnor_h_norm_sq(const MilnorState& s) { return s.k * s.k / (s.a * s.b * s.c); }

double MilnorRhs::norm() const { return std::sqrt(da * da + db * db + dc * dc + dk * dk); }

MilnorRhs homogeneous_rhs(const MilnorState& s) {
  s.validate();
  const auto r = milnor_ricci(s);
  const auto h2 = milnor_h_sq(s);
  return {-2.0 * r[0] + 0.5 * h2[0], -2.0 * r[1] + 0.5 * h2[1], -2.0 * r[2] + 0.5 * h2[2], 0.0};
}

double bismut_flat_k(const MilnorState& s) {
  s.validate();
  // -2 r_i + 1/2 k^2 g_i / (abc) = 0 for each i
  const auto r = milnor_ricci(s);
  const std::array<double, 3> g = s.metric();
  const double vol = s.a * s.b * s.c;
  std::array<double, 3> k2{};
  for (int i = 0; i < 3; ++i) k2[i] = 4.0 * r[i] * vol / g[i];
  const double ref = k2[0];
  if (!(ref > 0.0)) throw ParameterError("no Bismut-flat three-form: Ricci is not positive");
  for (double v : k2)
    if (std::abs(v - ref) > 1e-12 * std::abs(ref))
      throw ParameterError("no Bismut-flat three-form: Ricci is not proportional to H2");
  return std::sqrt(ref);
}

// ---------------------------------------------------------------------------
// integration

namespace {

// (a, b, c, k, ln sqrt(abc))
using Vec = Eigen::Matrix<double, 5, 1>;

MilnorState unpack(const Vec& y, const MilnorState& shape, double t) {
  MilnorState s = shape;
  s.a = y[0];
  s.b = y[1];
  s.c = y[2];
  s.k = y[3];
  s.t = t;
  return s;
}

Vec pack(const MilnorState& s, double log_volume) {
  Vec y;
  y << s.a, s.b, s.c, s.k, log_volume;
  return y;
}

bool admissible(const Vec& y) { return y.allFinite() && y[0] > 0.0 && y[1] > 0.0 && y[2] > 0.0; }

Vec rate(const Vec& y, const MilnorState& shape) {
  const MilnorState s = unpack(y, shape, 0.0);
  const MilnorRhs d = homogeneous_rhs(s);
  const auto h2 = milnor_h_sq(s);
  const double tr_h2 = h2[0] / s.a + h2[1] / s.b + h2[2] / s.c;
  Vec out;
  out << d.da, d.db, d.dc, d.dk, -milnor_scalar_curvature(s) + 0.25 * tr_h2;
  return out;
}

// One classical RK4 step; a stage that leaves the domain is returned as is.
Vec rk4(const Vec& y, double h, const MilnorState& shape) {
  const Vec k1 = rate(y, shape);
  const Vec y2 = y + 0.5 * h * k1;
  if (!admissible(y2)) return y2;
  const Vec k2 = rate(y2, shape);
  const Vec y3 = y + 0.5 * h * k2;
  if (!admissible(y3)) return y3;
  const Vec k3 = rate(y3, shape);
  const Vec y4 = y + h * k3;
  if (!admissible(y4)) return y4;
  const Vec k4 = rate(y4, shape);
  return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double extrapolated_collapse(const Vec& y, const MilnorState& shape, double t, std::size_t& which) {
  const Vec d = rate(y, shape);
  double best = std::numeric_limits<double>::infinity();
  which = 0;
  for (int i = 0; i < 3; ++i)
    if (d[i] < 0.0 && t - y[i] / d[i] < best) {
      best = t - y[i] / d[i];
      which = static_cast<std::size_t>(i);
    }
  return best;
}

}  // namespace

HomogeneousRun evolve_ode(const MilnorState& s0, double T, const OdeControl& ctrl) {
  s0.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("homogeneous horizon must be positive");
  if (!(ctrl.max_step > 0.0) || !(ctrl.output_interval > 0.0) || !(ctrl.tolerance > 0.0))
    throw ParameterError("ODE control values must be positive");

  auto run = std::make_shared<HomogeneousRun>();
  const double t_end = s0.t + T;
  const double g_min0 = std::min({s0.a, s0.b, s0.c});
  const double threshold = ctrl.collapse_fraction * g_min0;
  const double ln_vol0 = 0.5 * std::log(s0.a * s0.b * s0.c);
  Vec y = pack(s0, ln_vol0);
  double t = s0.t;
  run->states.push_back(s0);
  run->log_volume.push_back(ln_vol0);

  auto collapse = [&](const std::string& why) {
    std::size_t which = 0;
    const double tc = extrapolated_collapse(y, s0, t, which);
    throw HomogeneousCollapse(why, t, which, tc, run);
  };

  long out_index = 1;
  double h = ctrl.adaptive ? std::min(ctrl.max_step, 1e-4 * std::max(1.0, T)) : ctrl.max_step;
  while (t < t_end) {
    const double next_out = std::min(t_end, s0.t + static_cast<double>(out_index) * ctrl.output_interval);
    // a remainder within round-off of a full step is merged into it
    const bool to_output = next_out - t <= h * (1.0 + 1e-9);
    const double step = to_output ? next_out - t : h;
    if (step <= 1e-15 * std::max(1.0, std::abs(t))) collapse("metric coefficient collapse: step size underflow");

    Vec full = rk4(y, step, s0);
    Vec next;
    bool accept = admissible(full);
    double err = 0.0;
    if (accept && ctrl.adaptive) {
      const Vec mid = rk4(y, 0.5 * step, s0);
      next = admissible(mid) ? rk4(mid, 0.5 * step, s0) : mid;
      accept = admissible(next);
      if (accept) {
        const Vec scale = y.cwiseAbs().cwiseMax(next.cwiseAbs()).cwiseMax(Vec::Ones());
        err = ((next - full).cwiseAbs().cwiseQuotient(scale)).maxCoeff() / 15.0;
        accept = err <= ctrl.tolerance;
      }
    } else {
      next = full;
    }
    if (!accept) {
      ++run->rejected;
      if (!ctrl.adaptive && !admissible(full)) collapse("metric coefficient collapse");
      h = 0.5 * step;
      continue;
    }
    y = next;
    t = to_output ? next_out : t + step;
    ++run->steps;
    if (ctrl.adaptive) {
      const double grow = err > 0.0 ? 0.9 * std::pow(ctrl.tolerance / err, 0.2) : 2.0;
      const double proposed = std::min(ctrl.max_step, step * std::clamp(grow, 0.2, 2.0));
      // a step shortened to land on an output time keeps the current size
      if (!(to_output && step < h && proposed < h)) h = proposed;
    }
    if (to_output) {
      run->states.push_back(unpack(y, s0, t));
      run->log_volume.push_back(y[4]);
      ++out_index;
    }
    if (std::min({y[0], y[1], y[2]}) < threshold) collapse("metric coefficient collapse");
  }
  return *run;
}

HomogeneousReport homogeneous_reports(const HomogeneousRun& run) {
  HomogeneousReport r;
  if (run.states.empty()) return r;
  const MilnorState& s0 = run.states.front();
  for (std::size_t q = 0; q < run.states.size(); ++q) {
    const MilnorState& s = run.states[q];
    const auto ric = milnor_ricci(s);
    const auto h2 = milnor_h_sq(s);
    const std::array<double, 3> g = s.metric();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, h2max = 0.0, tr = 0.0;
    for (int i = 0; i < 3; ++i) {
      lo = std::min(lo, ric[i] / g[i]);
      hi = std::max(hi, ric[i] / g[i]);
      h2max = std::max(h2max, h2[i] / g[i]);
      tr += h2[i] / g[i];
      r.drift = std::max(r.drift, std::abs(g[i] - s0.metric()[i]));
    }
    if (s.t > 0.0) {
      r.bounds.K1 = std::max(r.bounds.K1, s.t * std::max(0.0, -lo));
      r.bounds.K2 = std::max(r.bounds.K2, s.t * std::max(0.0, hi));
      r.bounds.K3 = std::max(r.bounds.K3, s.t * h2max);
    }
    // H2 = |H|^2 g is parallel, so K4 stays 0.
    r.k_change = std::max(r.k_change, std::abs(s.k - s0.k));
    r.drift = std::max(r.drift, r.k_change);
    r.rhs_norm_max = std::max(r.rhs_norm_max, homogeneous_rhs(s).norm());
    r.trace_identity = std::max(r.trace_identity, std::abs(tr - 3.0 * milnor_h_norm_sq(s)));
    if (q < run.log_volume.size())
      r.volume_residual =
          std::max(r.volume_residual, std::abs(0.5 * std::log(s.a * s.b * s.c) - run.log_volume[q]));
  }
  return r;
}

Json homogeneous_run_to_json(const HomogeneousRun& run) {
  Json states = Json::array();
  for (std::size_t q = 0; q < run.states.size(); ++q) {
    const MilnorState& s = run.states[q];
    states.push_back({{"t", s.t}, {"a", s.a}, {"b", s.b}, {"c", s.c}, {"k", s.k},
                      {"log_volume", q < run.log_volume.size() ? run.log_volume[q] : 0.0}});
  }
  const std::array<double, 3> lambda =
      run.states.empty() ? std::array<double, 3>{0.0, 0.0, 0.0} : run.states.front().lambda;
  return {{"format", "grf-homogeneous-run"},
          {"lambda", lambda},
          {"steps", run.steps},
          {"rejected", run.rejected},
          {"states", states}};
}

Json homogeneous_report_to_json(const HomogeneousReport& r) {
  return {{"bounds", {{"K1", r.bounds.K1}, {"K2", r.bounds.K2}, {"K3", r.bounds.K3}, {"K4", r.bounds.K4}}},
          {"volume_residual", r.volume_residual},
          {"rhs_norm_max", r.rhs_norm_max},
          {"drift", r.drift},
          {"trace_identity", r.trace_identity},
          {"k_change", r.k_change}};
}

}  // namespace grf
