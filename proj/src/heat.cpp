#include "grf/heat.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "grf/trajectory_io.hpp"

namespace grf {

ScalarEvolution::ScalarEvolution(std::shared_ptr<const Trajectory> traj, std::vector<ScalarField> values, Direction dir)
    : traj_(std::move(traj)), values_(std::move(values)), dir_(dir) {
  if (!traj_) throw ParameterError("scalar evolution needs a trajectory");
  if (values_.empty() || values_.size() > traj_->size())
    throw ShapeError("scalar evolution must cover between 1 and all trajectory snapshots");
  for (const ScalarField& v : values_) {
    require_same_grid(traj_->grid(), v.grid, "scalar evolution snapshot");
    if (!v.all_finite()) throw ParameterError("scalar evolution values must be finite");
  }
}

std::vector<double> ScalarEvolution::times() const {
  return std::vector<double>(traj_->times().begin(), traj_->times().begin() + static_cast<std::ptrdiff_t>(size()));
}

namespace {

struct StageGeometry {
  LaplaceOperator lap;
  ScalarField rate;  // -R + 1/4 tr H2; only filled for the conjugate equation
};

StageGeometry geometry_at(const TrajectoryInterpolator& interp, double t, bool with_rate) {
  const FlowState s = interp.state(t);
  StageGeometry out{LaplaceOperator(s.g), ScalarField()};
  if (with_rate) out.rate = volume_rate(s);
  return out;
}

void require_positive(const ScalarField& u, double t, const char* what) {
  if (!u.all_finite() || !(u.values.minCoeff() > 0.0))
    throw InstabilityError(std::string(what) + " lost positivity near t = " + std::to_string(t) +
                               " (time step too large for the data)",
                           t);
}

// One RK4 step of du/ds = L(s) u + c(s) u between geometries a (s), m (s + ds/2), e (s + ds).
ScalarField rk4(const ScalarField& u, double ds, const StageGeometry& a, const StageGeometry& m,
                const StageGeometry& e, bool with_rate) {
  auto f = [&](const StageGeometry& g, const ScalarField& v) {
    ScalarField out = g.lap.apply(v);
    if (with_rate) out.values.array() += g.rate.values.array() * v.values.array();
    return out;
  };
  ScalarField tmp(u.grid);
  const ScalarField k1 = f(a, u);
  tmp.values = u.values + 0.5 * ds * k1.values;
  const ScalarField k2 = f(m, tmp);
  tmp.values = u.values + 0.5 * ds * k2.values;
  const ScalarField k3 = f(m, tmp);
  tmp.values = u.values + ds * k3.values;
  const ScalarField k4 = f(e, tmp);
  ScalarField out = u;
  out.values += ds / 6.0 * (k1.values + 2.0 * k2.values + 2.0 * k3.values + k4.values);
  return out;
}

}  // namespace

ScalarEvolution solve_heat(std::shared_ptr<const Trajectory> traj, const ScalarField& u0) {
  if (!traj) throw ParameterError("solve_heat needs a trajectory");
  require_same_grid(traj->grid(), u0.grid, "initial heat datum");
  if (!u0.all_finite() || !(u0.values.minCoeff() > 0.0)) throw ParameterError("initial heat datum must be positive");
  const TrajectoryInterpolator interp(traj);
  const auto& times = traj->times();
  std::vector<ScalarField> values{u0};
  ScalarField u = u0;
  for (std::size_t k = 0; k + 1 < traj->size(); ++k) {
    const int n = traj->substeps()[k];
    const double dt = traj->step_sizes()[k];
    StageGeometry start = geometry_at(interp, times[k], false);
    for (int i = 0; i < n; ++i) {
      const double ta = times[k] + i * dt;
      const double te = i + 1 == n ? times[k + 1] : ta + dt;
      const StageGeometry mid = geometry_at(interp, ta + 0.5 * dt, false);
      StageGeometry end = geometry_at(interp, te, false);
      u = rk4(u, dt, start, mid, end, false);
      require_positive(u, te, "heat solution");
      start = std::move(end);
    }
    values.push_back(u);
  }
  return ScalarEvolution(std::move(traj), std::move(values), Direction::forward);
}

ScalarField normalize_mass(const MetricField& g, const ScalarField& profile) {
  if (!profile.all_finite() || !(profile.values.minCoeff() > 0.0))
    throw ParameterError("terminal datum must be positive");
  ScalarField out = profile;
  out.values /= integrate(g, profile);
  return out;
}

ConjugateSolution solve_conjugate(std::shared_ptr<const Trajectory> traj, const ScalarField& terminal,
                                  double terminal_time) {
  if (!traj) throw ParameterError("solve_conjugate needs a trajectory");
  if (!(terminal_time > 0.0) || !(terminal_time < traj->horizon()))
    throw ParameterError("conjugate terminal time must satisfy 0 < T' < T");
  const std::size_t m = traj->index_of(terminal_time);
  require_same_grid(traj->grid(), terminal.grid, "terminal datum");
  const TrajectoryInterpolator interp(traj);
  const auto& times = traj->times();
  std::vector<ScalarField> values(m + 1);
  ScalarField K = normalize_mass((*traj)[m].g, terminal);
  values[m] = K;
  // Backward in t is forward in tau = T' - t: dK/dtau = Lap K + (-R + 1/4 tr H2) K.
  for (std::size_t k = m; k-- > 0;) {
    const int n = traj->substeps()[k];
    const double dt = traj->step_sizes()[k];
    StageGeometry start = geometry_at(interp, times[k + 1], true);
    for (int i = 0; i < n; ++i) {
      const double ta = times[k + 1] - i * dt;
      const double te = i + 1 == n ? times[k] : ta - dt;
      const StageGeometry mid = geometry_at(interp, ta - 0.5 * dt, true);
      StageGeometry end = geometry_at(interp, te, true);
      K = rk4(K, dt, start, mid, end, true);
      require_positive(K, te, "conjugate heat kernel");
      start = std::move(end);
    }
    values[k] = K;
  }
  const int n = traj->dim();
  const double tref = times[m];
  std::vector<ScalarField> potential;
  for (std::size_t k = 0; k < m; ++k) {
    ScalarField f(traj->grid());
    const double shift = 0.5 * n * std::log(4.0 * std::numbers::pi * (tref - times[k]));
    f.values = -values[k].values.array().log() - shift;
    potential.push_back(std::move(f));
  }
  ScalarEvolution kernel(traj, std::move(values), Direction::backward);
  // With T' the first positive snapshot the potential is defined at t = 0 only.
  ScalarEvolution pot(traj, std::move(potential), Direction::backward);
  return ConjugateSolution{std::move(kernel), std::move(pot), m, tref};
}

double WeightedMeasure::max_mass_drift() const {
  double d = 0.0;
  for (double v : mass) d = std::max(d, std::abs(v - 1.0));
  return d;
}

double WeightedMeasure::integrate(std::size_t k, const ScalarField& f) const {
  require_same_grid(density[k].grid, f.grid, "integrand");
  double total = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) total += f[p] * density[k][p];
  return total * traj->grid().cell_volume();
}

WeightedMeasure weighted_measure(const ScalarEvolution& kernel) {
  WeightedMeasure mu{kernel.trajectory_ptr(), {}, {}};
  const double cell = kernel.trajectory().grid().cell_volume();
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    if (!(kernel[k].values.minCoeff() > 0.0)) throw ParameterError("weighted measure needs a positive kernel");
    ScalarField d = kernel[k];
    d.values.array() *= kernel.metric(k).sqrt_det().values.array();
    mu.density.push_back(std::move(d));
  }
  const std::size_t last = kernel.size() - 1;
  double terminal_mass = 0.0;
  for (std::size_t p = 0; p < mu.density[last].size(); ++p) terminal_mass += mu.density[last][p];
  terminal_mass *= cell;
  for (ScalarField& d : mu.density) {
    d.values /= terminal_mass;
    double m = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) m += d[p];
    mu.mass.push_back(m * cell);
  }
  return mu;
}

TimeSeries measure_evolution_residual(const WeightedMeasure& mu, const ScalarEvolution& kernel) {
  if (mu.size() != kernel.size()) throw ShapeError("measure and kernel cover different snapshots");
  if (mu.size() < 3) throw ShapeError("measure residual needs at least 3 snapshots");
  const std::vector<double> times = kernel.times();
  TimeSeries out;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const DerivativeStencil st = time_derivative_stencil(times, k);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mu.density[k].size()));
    for (int j = 0; j < 3; ++j) d += st.weight[j] * mu.density[st.index[j]].values;
    const MetricField& g = kernel.metric(k);
    ScalarField K = mu.density[k];
    K.values.array() /= g.sqrt_det().values.array();
    const ScalarField lap = laplacian(g, K);
    const Eigen::ArrayXd expected = -lap.values.array() * g.sqrt_det().values.array();
    out.times.push_back(times[k]);
    out.values.push_back((d.array() - expected).abs().maxCoeff() / mu.density[k].values.cwiseAbs().maxCoeff());
  }
  return out;
}

TimeSeries duality_residual(const ScalarEvolution& u, const ScalarEvolution& kernel) {
  if (u.trajectory_ptr() != kernel.trajectory_ptr()) throw ShapeError("u and K must share the trajectory");
  const std::size_t n = std::min(u.size(), kernel.size());
  if (n < 3) throw ShapeError("duality residual needs at least 3 common snapshots");
  std::vector<double> pairing(n);
  for (std::size_t k = 0; k < n; ++k) {
    ScalarField prod = u[k];
    prod.values.array() *= kernel[k].values.array();
    pairing[k] = integrate(u.metric(k), prod);
  }
  const std::vector<double> times(u.trajectory().times().begin(),
                                  u.trajectory().times().begin() + static_cast<std::ptrdiff_t>(n));
  TimeSeries out;
  for (std::size_t k = 0; k < n; ++k) {
    const DerivativeStencil st = time_derivative_stencil(times, k);
    double d = 0.0;
    for (int j = 0; j < 3; ++j) d += st.weight[j] * pairing[st.index[j]];
    out.times.push_back(times[k]);
    out.values.push_back(std::abs(d));
  }
  return out;
}

Json evolution_to_json(const ScalarEvolution& e) {
  Json values = Json::array();
  for (const ScalarField& v : e.values()) values.push_back(field_to_json(v));
  return {{"format", "grf-scalar-evolution"},
          {"direction", e.direction() == Direction::forward ? "forward" : "backward"},
          {"times", e.times()},
          {"values", values}};
}

}  // namespace grf
