#include "grf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace grf {

FlowState::FlowState(MetricField metric, std::optional<ThreeFormField> form, double time)
    : g(std::move(metric)), h(std::move(form)), t(time) {
  if (h) require_same_grid(g.grid(), h->grid(), "metric and three-form");
  if (!std::isfinite(t) || t < 0.0) throw ParameterError("flow time must be finite and nonnegative");
}

FlowRhs grf_rhs(const FlowState& s) {
  const Ricci r = ricci(s.g);
  FlowRhs out{SymTensorField(s.grid()), std::nullopt};
  out.dg.values = -2.0 * r.ric.values;
  if (s.h) {
    const HFormTerms terms = hform_ops(s.g, *s.h);
    out.dg.values += 0.5 * terms.h_sq.values;
    ScalarField dphi = terms.dd_star.coefficient;
    dphi.values = -dphi.values;
    out.dh = ThreeFormField(std::move(dphi));
  }
  return out;
}

double stable_dt(const FlowState& s, double cfl) {
  if (!(cfl > 0.0)) throw ParameterError("cfl constant must be positive");
  const double h = s.grid().min_spacing();
  return cfl * h * h * s.g.min_eigenvalue().values.minCoeff();
}

namespace {

FlowState advance(const FlowState& s, const FlowRhs& rate, double dt, double t_new) {
  SymTensorField g = s.g.base();
  g.values += dt * rate.dg.values;
  MetricField metric;
  try {
    metric = MetricField(std::move(g));
  } catch (const DomainError& e) {
    throw SingularityError("metric degenerated near t = " + std::to_string(t_new) + " at grid point " +
                               std::to_string(e.point()) + " (smallest eigenvalue " +
                               std::to_string(e.min_eigenvalue()) + ")",
                           t_new, e.point());
  }
  std::optional<ThreeFormField> h;
  if (s.h) {
    ScalarField phi = s.h->coefficient;
    phi.values += dt * rate.dh->coefficient.values;
    if (!phi.all_finite()) throw SingularityError("three-form blew up near t = " + std::to_string(t_new), t_new, 0);
    h = ThreeFormField(std::move(phi));
  }
  return FlowState(std::move(metric), std::move(h), t_new);
}

FlowRhs weighted_sum(const FlowRhs& k1, const FlowRhs& k2, const FlowRhs& k3, const FlowRhs& k4) {
  FlowRhs out{k1.dg, std::nullopt};
  out.dg.values = (k1.dg.values + 2.0 * k2.dg.values + 2.0 * k3.dg.values + k4.dg.values) / 6.0;
  if (k1.dh) {
    ScalarField c = k1.dh->coefficient;
    c.values = (k1.dh->coefficient.values + 2.0 * k2.dh->coefficient.values + 2.0 * k3.dh->coefficient.values +
                k4.dh->coefficient.values) /
               6.0;
    out.dh = ThreeFormField(std::move(c));
  }
  return out;
}

}  // namespace

FlowState step(const FlowState& s, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("time step must be positive");
  const FlowRhs k1 = grf_rhs(s);
  const FlowRhs k2 = grf_rhs(advance(s, k1, 0.5 * dt, s.t + 0.5 * dt));
  const FlowRhs k3 = grf_rhs(advance(s, k2, 0.5 * dt, s.t + 0.5 * dt));
  const FlowRhs k4 = grf_rhs(advance(s, k3, dt, s.t + dt));
  return advance(s, weighted_sum(k1, k2, k3, k4), dt, s.t + dt);
}

Trajectory::Trajectory(std::vector<FlowState> states, std::vector<double> step_sizes, std::vector<int> substeps,
                       bool frozen)
    : states_(std::move(states)), step_sizes_(std::move(step_sizes)), substeps_(std::move(substeps)), frozen_(frozen) {
  if (states_.empty()) throw ShapeError("trajectory needs at least one snapshot");
  if (step_sizes_.size() + 1 != states_.size() || substeps_.size() + 1 != states_.size())
    throw ShapeError("trajectory step metadata must have one entry per interval");
  if (states_.front().t != 0.0) throw ParameterError("trajectory must start at t = 0");
  const bool with_h = states_.front().h.has_value();
  for (std::size_t k = 0; k < states_.size(); ++k) {
    require_same_grid(states_.front().grid(), states_[k].grid(), "trajectory snapshots");
    if (states_[k].h.has_value() != with_h) throw ShapeError("three-form present in some snapshots only");
    if (k > 0 && !(states_[k].t > states_[k - 1].t)) throw ParameterError("snapshot times must increase strictly");
    if (k > 0 && (!(step_sizes_[k - 1] > 0.0) || substeps_[k - 1] < 1))
      throw ParameterError("step sizes must be positive");
    times_.push_back(states_[k].t);
  }
}

Trajectory Trajectory::frozen(const FlowState& s, double horizon, const StepControl& ctrl) {
  if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");
  if (ctrl.cadence < 1) throw ParameterError("output cadence must be at least 1");
  const double dt_max = stable_dt(s, ctrl.cfl);
  std::vector<FlowState> states;
  std::vector<double> sizes;
  std::vector<int> subs;
  for (int k = 0; k <= ctrl.cadence; ++k) {
    const double t = horizon * k / ctrl.cadence;
    states.emplace_back(s.g, s.h, t);
    if (k > 0) {
      const double interval = t - states[states.size() - 2].t;
      const int n = std::max(1, static_cast<int>(std::ceil(interval / dt_max - 1e-9)));
      subs.push_back(n);
      sizes.push_back(interval / n);
    }
  }
  return Trajectory(std::move(states), std::move(sizes), std::move(subs), true);
}

std::size_t Trajectory::index_of(double t) const {
  const double tol = 1e-9 * std::max(1.0, horizon());
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it == times_.end() || std::abs(*it - t) > tol)
    throw RangeError("time " + std::to_string(t) + " is not a snapshot time of the trajectory");
  return static_cast<std::size_t>(it - times_.begin());
}

Trajectory evolve(const FlowState& s0, double horizon, const StepControl& ctrl) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("horizon must be positive");
  if (ctrl.cadence < 1) throw ParameterError("output cadence must be at least 1");
  if (s0.t != 0.0) throw ParameterError("initial state must sit at t = 0");
  std::vector<FlowState> states{s0};
  std::vector<double> sizes;
  std::vector<int> subs;
  long total = 0;
  FlowState cur = s0;
  try {
    for (int k = 0; k < ctrl.cadence; ++k) {
      const double t_end = horizon * (k + 1) / ctrl.cadence;
      const double interval = t_end - cur.t;
      const double dt_max = stable_dt(cur, ctrl.cfl);
      const int n = std::max(1, static_cast<int>(std::ceil(interval / dt_max - 1e-9)));
      total += n;
      if (total > ctrl.max_substeps)
        throw ParameterError("evolve: internal step budget exceeded (" + std::to_string(ctrl.max_substeps) + ")");
      const double dt = interval / n;
      for (int i = 0; i < n; ++i) cur = step(cur, dt);
      cur.t = t_end;
      states.push_back(cur);
      sizes.push_back(dt);
      subs.push_back(n);
    }
  } catch (const SingularityError& e) {
    throw FlowAborted(e, std::make_shared<const Trajectory>(std::move(states), std::move(sizes), std::move(subs)));
  }
  return Trajectory(std::move(states), std::move(sizes), std::move(subs));
}

TrajectoryInterpolator::TrajectoryInterpolator(std::shared_ptr<const Trajectory> traj) : traj_(std::move(traj)) {
  if (!traj_) throw ParameterError("interpolator needs a trajectory");
  rates_.reserve(traj_->size());
  for (const FlowState& s : traj_->states()) {
    if (traj_->is_frozen()) {
      FlowRhs zero{SymTensorField(s.grid()), std::nullopt};
      if (s.h) zero.dh = ThreeFormField(ScalarField(s.grid()));
      rates_.push_back(std::move(zero));
    } else {
      rates_.push_back(grf_rhs(s));
    }
  }
}

TrajectoryInterpolator::Bracket TrajectoryInterpolator::bracket(double t) const {
  const auto& times = traj_->times();
  const double tol = 1e-12 * std::max(1.0, traj_->horizon());
  if (t < -tol || t > times.back() + tol) throw RangeError("time outside the trajectory");
  t = std::clamp(t, 0.0, times.back());
  if (times.size() == 1) return {0, 0.0, 0.0};
  std::size_t k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  k = std::clamp<std::size_t>(k, 1, times.size() - 1) - 1;
  const double dt = times[k + 1] - times[k];
  if (t == times[k]) return {k, 0.0, dt};
  if (t == times[k + 1]) return {k, 1.0, dt};
  return {k, (t - times[k]) / dt, dt};
}

namespace {

struct HermiteWeights {
  double h00, h10, h01, h11;
  explicit HermiteWeights(double s)
      : h00((1 + 2 * s) * (1 - s) * (1 - s)), h10(s * (1 - s) * (1 - s)), h01(s * s * (3 - 2 * s)),
        h11(s * s * (s - 1)) {}
};

}  // namespace

FlowState TrajectoryInterpolator::state(double t) const {
  const Bracket br = bracket(t);
  t = std::clamp(t, 0.0, traj_->horizon());
  const FlowState& a = (*traj_)[br.k];
  if (traj_->size() == 1 || br.s == 0.0) return FlowState(a.g, a.h, t);
  const FlowState& b = (*traj_)[br.k + 1];
  if (br.s == 1.0) return FlowState(b.g, b.h, t);
  const HermiteWeights w(br.s);
  const double dt = br.dt;
  SymTensorField g(a.grid());
  g.values = w.h00 * a.g.base().values + w.h10 * dt * rates_[br.k].dg.values + w.h01 * b.g.base().values +
             w.h11 * dt * rates_[br.k + 1].dg.values;
  std::optional<ThreeFormField> h;
  if (a.h) {
    ScalarField phi(a.grid());
    phi.values = w.h00 * a.h->coefficient.values + w.h10 * dt * rates_[br.k].dh->coefficient.values +
                 w.h01 * b.h->coefficient.values + w.h11 * dt * rates_[br.k + 1].dh->coefficient.values;
    h = ThreeFormField(std::move(phi));
  }
  return FlowState(MetricField(std::move(g)), std::move(h), t);
}

SmallMatrix<double> TrajectoryInterpolator::metric_at(double t, const Point& x) const {
  const Bracket br = bracket(t);
  const PointStencil st = point_stencil(traj_->grid(), x);
  const FlowState& a = (*traj_)[br.k];
  if (traj_->size() == 1 || br.s == 0.0) return sample_metric(a.g, st);
  const FlowState& b = (*traj_)[br.k + 1];
  if (br.s == 1.0) return sample_metric(b.g, st);
  const HermiteWeights w(br.s);
  const int n = traj_->dim();
  const SymTensorField& ra = rates_[br.k].dg;
  const SymTensorField& rb = rates_[br.k + 1].dg;
  SmallMatrix<double> m = SmallMatrix<double>::Zero(n, n);
  for (std::size_t q = 0; q < st.nodes.size(); ++q) {
    const std::size_t p = st.nodes[q];
    m += st.weight[q] * (w.h00 * a.g.at(p) + w.h10 * br.dt * ra.at(p) + w.h01 * b.g.at(p) + w.h11 * br.dt * rb.at(p));
  }
  return m;
}

ScalarField volume_rate(const FlowState& s) {
  ScalarField out = ricci(s.g).scalar;
  out.values = -out.values;
  if (s.h) out.values += 0.25 * trace_g(s.g, hform_ops(s.g, *s.h).h_sq).values;
  return out;
}

TimeSeries volume_evolution_residual(const Trajectory& traj) {
  if (traj.size() < 3) throw ShapeError("volume residual needs at least 3 snapshots");
  std::vector<ScalarField> rates;
  rates.reserve(traj.size());
  for (const FlowState& s : traj.states()) rates.push_back(volume_rate(s));
  TimeSeries out;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const DerivativeStencil st = time_derivative_stencil(traj.times(), k);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(traj.grid().size()));
    for (int j = 0; j < 3; ++j) d += st.weight[j] * traj[st.index[j]].g.sqrt_det().values;
    const auto& sq = traj[k].g.sqrt_det().values;
    out.times.push_back(traj.times()[k]);
    out.values.push_back((d.array() - rates[k].values.array() * sq.array()).abs().maxCoeff());
  }
  return out;
}

namespace {

// Extreme generalized eigenvalues of (a, g) at one point.
std::pair<double, double> relative_eigen_range(const SmallMatrix<double>& a, const SmallMatrix<double>& g) {
  const SmallVector<double> ev = relative_eigenvalues(a, g);
  return {ev(0), ev(ev.size() - 1)};
}

}  // namespace

CurvatureBounds curvature_bounds(const Trajectory& traj) {
  CurvatureBounds kb;
  const std::size_t npts = traj.grid().size();
  std::vector<double> k1(npts), k2(npts), k3(npts);
  for (const FlowState& s : traj.states()) {
    const double t = s.t;
    std::optional<HFormTerms> terms;
    if (s.h) terms = hform_ops(s.g, *s.h);
    if (terms) {
      const TensorDerivatives d = tensor_calculus(s.g, terms->h_sq);
      for (std::size_t p = 0; p < npts; ++p) kb.K4 = std::max(kb.K4, std::sqrt(std::max(0.0, d.norm_sq[p])));
    }
    if (t <= 0.0) continue;
    const Ricci r = ricci(s.g);
    parallel_for(npts, [&](std::size_t p) {
      const SmallMatrix<double> gp = s.g.at(p);
      const auto [lo, hi] = relative_eigen_range(r.ric.at(p), gp);
      k1[p] = t * std::max(0.0, -lo);
      k2[p] = t * std::max(0.0, hi);
      k3[p] = terms ? t * std::max(0.0, relative_eigen_range(terms->h_sq.at(p), gp).second) : 0.0;
    });
    for (std::size_t p = 0; p < npts; ++p) {
      kb.K1 = std::max(kb.K1, k1[p]);
      kb.K2 = std::max(kb.K2, k2[p]);
      kb.K3 = std::max(kb.K3, k3[p]);
    }
  }
  return kb;
}

}  // namespace grf
