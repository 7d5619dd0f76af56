#include "grf/estimates.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace grf {

void LiYauParams::validate() const {
  if (!(alpha > 1.0)) throw ParameterError("Li-Yau alpha must exceed 1");
  if (!(a > 0.0) || !(b > 0.0)) throw ParameterError("Li-Yau a and b must be positive");
  if (std::abs(a + 2.0 * b - 1.0 / alpha) > 1e-12) throw ParameterError("Li-Yau parameters need a + 2b = 1/alpha");
}

LiYauParams LiYauParams::balanced(double alpha) {
  // a = 2b and a + 2b = 1/alpha.
  return LiYauParams{alpha, 0.5 / alpha, 0.25 / alpha};
}

LiYauConstants liyau_constants(int n, const LiYauParams& p, const CurvatureBounds& kb) {
  p.validate();
  const double al = p.alpha, am1 = al - 1.0;
  const double lead = n * al * al * al / (p.a * am1 * am1);
  const double k13 = kb.K1 + am1 * kb.K3 / (4.0 * al);
  LiYauConstants c;
  c.B1 = lead / 512.0 + 3.0 * n * al * kb.K4 * kb.K4 / 8.0;
  c.B2 = 0.5 * lead * k13 * k13 + n * al * kb.K() / (2.0 * p.b) + n * al * kb.K3 * kb.K3 / (32.0 * p.b);
  c.B3 = lead / 16.0 * k13;
  return c;
}

double liyau_rhs(int n, const LiYauParams& p, const LiYauConstants& c, double t) {
  const double r = std::sqrt(n * p.alpha / (2.0 * p.a));
  return r * ((r + std::sqrt(c.B2)) / t + std::sqrt(c.B3) / std::sqrt(t) + std::sqrt(c.B1));
}

double harnack_xi(int n, const LiYauParams& p, const LiYauConstants& c) {
  const double r2 = n * p.alpha / (2.0 * p.a);
  return r2 + std::sqrt(r2 * c.B2);
}

double ricci_flow_envelope(int n, const LiYauParams& p, double K, double t) {
  p.validate();
  const double al = p.alpha, am1 = al - 1.0;
  const double inner = n * n * std::pow(al, 4) / (4.0 * p.a * p.a * am1 * am1) + n * n * al * al * K / (4.0 * p.a * p.b);
  return n * al / (2.0 * p.a * t) + std::sqrt(inner) / t;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::inconclusive:
      return "inconclusive";
    case Verdict::violated:
      return "violated";
  }
  return "violated";
}

Verdict classify(double slack, double budget) {
  if (!std::isfinite(slack)) return Verdict::violated;
  if (slack >= 0.0) return Verdict::pass;
  return slack < -budget ? Verdict::violated : Verdict::inconclusive;
}

double BudgetPolicy::budget(const Trajectory& traj, double scale) const {
  const double h = traj.grid().max_spacing();
  double dt = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) dt = std::max(dt, traj.times()[k] - traj.times()[k - 1]);
  return c_b * (h * h + dt * dt) * std::abs(scale);
}

Json report_to_json(const EstimateReport& r) {
  return {{"check", r.check},
          {"worst_slack", r.worst_slack},
          {"location", {{"t", r.location.t}, {"x", r.location.x}}},
          {"budget", r.budget},
          {"verdict", to_string(r.verdict)},
          {"samples", r.samples},
          {"details", r.details}};
}

void write_series_csv(std::ostream& os, const EstimateReport& r) {
  os << "t,lhs,rhs,slack\n";
  for (std::size_t k = 0; k < r.lhs.size(); ++k) {
    const double rhs = k < r.rhs.size() ? r.rhs.values[k] : std::numeric_limits<double>::quiet_NaN();
    os << format_double(r.lhs.times[k]) << ',' << format_double(r.lhs.values[k]) << ',' << format_double(rhs) << ','
       << format_double(rhs - r.lhs.values[k]) << '\n';
  }
}

namespace {

void require_positive_evolution(const ScalarEvolution& u) {
  for (std::size_t k = 0; k < u.size(); ++k)
    if (!(u[k].values.minCoeff() > 0.0)) throw ParameterError("estimates need a positive solution");
}

ScalarField time_derivative(const ScalarEvolution& u, const std::vector<double>& times, std::size_t k) {
  const DerivativeStencil st = time_derivative_stencil(times, k);
  ScalarField d(u[k].grid);
  for (int j = 0; j < 3; ++j) d.values += st.weight[j] * u[st.index[j]].values;
  return d;
}

}  // namespace

EstimateReport liyau_check(const ScalarEvolution& u, const LiYauParams& p, const CurvatureBounds& kb,
                           const BudgetPolicy& policy) {
  require_positive_evolution(u);
  if (u.size() < 3) throw ShapeError("Li-Yau check needs at least 3 snapshots");
  const int n = u.trajectory().dim();
  const LiYauConstants c = liyau_constants(n, p, kb);
  const std::vector<double> times = u.times();
  EstimateReport r;
  r.check = "liyau";
  r.worst_slack = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (std::size_t k = 1; k < u.size(); ++k) {
    const ScalarField dtu = time_derivative(u, times, k);
    const ScalarDerivatives d = scalar_calculus(u.metric(k), u[k]);
    const Eigen::ArrayXd uu = u[k].values.array();
    const Eigen::ArrayXd lhs = d.grad_sq.values.array() / (uu * uu) - p.alpha * dtu.values.array() / uu;
    const double rhs = liyau_rhs(n, p, c, times[k]);
    Eigen::Index at = 0;
    const double lmax = lhs.maxCoeff(&at);
    r.lhs.times.push_back(times[k]);
    r.lhs.values.push_back(lmax);
    r.rhs.times.push_back(times[k]);
    r.rhs.values.push_back(rhs);
    scale = std::max(scale, std::abs(rhs));
    r.samples += static_cast<std::size_t>(lhs.size());
    if (!(rhs - lmax >= r.worst_slack)) {
      r.worst_slack = rhs - lmax;
      r.location = {times[k], u.trajectory().grid().position(static_cast<std::size_t>(at))};
    }
  }
  r.budget = policy.budget(u.trajectory(), scale);
  r.verdict = classify(r.worst_slack, r.budget);
  r.details = {{"alpha", p.alpha}, {"a", p.a}, {"b", p.b}, {"B1", c.B1}, {"B2", c.B2}, {"B3", c.B3}};
  return r;
}

std::vector<ScalarField> hamilton_quantity(const ScalarEvolution& u) {
  require_positive_evolution(u);
  const double A = u[0].values.maxCoeff();
  std::vector<ScalarField> out;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const ScalarDerivatives d = scalar_calculus(u.metric(k), u[k]);
    const Eigen::ArrayXd uu = u[k].values.array();
    ScalarField P(u[k].grid);
    P.values = u.time(k) * d.grad_sq.values.array() / uu - uu * (A / uu).log();
    out.push_back(std::move(P));
  }
  return out;
}

EstimateReport hamilton_check(const ScalarEvolution& u, const BudgetPolicy& policy) {
  if (u.size() < 2) throw ShapeError("Hamilton check needs at least 2 snapshots");
  const std::vector<ScalarField> P = hamilton_quantity(u);
  EstimateReport r;
  r.check = "hamilton";
  r.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < u.size(); ++k) {
    Eigen::Index at = 0;
    const double sup = P[k].values.maxCoeff(&at);
    r.lhs.times.push_back(u.time(k));
    r.lhs.values.push_back(sup);
    r.rhs.times.push_back(u.time(k));
    r.rhs.values.push_back(0.0);
    r.samples += P[k].size();
    if (!(-sup >= r.worst_slack)) {
      r.worst_slack = -sup;
      r.location = {u.time(k), u.trajectory().grid().position(static_cast<std::size_t>(at))};
    }
  }
  const double A = u[0].values.maxCoeff();
  r.budget = policy.budget(u.trajectory(), A);
  r.verdict = classify(r.worst_slack, r.budget);
  const double initial = P[0].values.maxCoeff();
  r.details = {{"A", A}, {"initial_sup_p", initial}, {"initial_nonpositive", initial <= 0.0}};
  return r;
}

TimeSeries lemma_residual(const ScalarEvolution& u, double alpha) {
  require_positive_evolution(u);
  if (u.size() < 5) throw ShapeError("lemma residual needs at least 5 snapshots");
  const std::vector<double> times = u.times();
  const GridSpec& grid = u.trajectory().grid();
  const int n = grid.dim();
  std::vector<ScalarField> f, ft, F;
  for (std::size_t k = 0; k < u.size(); ++k) f.emplace_back(grid, u[k].values.array().log().matrix());
  const ScalarEvolution fe(u.trajectory_ptr(), f, Direction::forward);
  for (std::size_t k = 0; k < u.size(); ++k) {
    ft.push_back(time_derivative(fe, times, k));
    const ScalarField grad_sq = scalar_calculus(u.metric(k), f[k]).grad_sq;
    F.emplace_back(grid, (times[k] * (grad_sq.values - alpha * ft[k].values)));
  }
  const ScalarEvolution Fe(u.trajectory_ptr(), F, Direction::forward);
  TimeSeries out;
  // d_t F at the last two snapshots would difference a one-sided d_t f, which is first order.
  for (std::size_t k = 0; k + 2 < u.size(); ++k) {
    const FlowState& s = u.trajectory()[k];
    const MetricField& g = s.g;
    const double t = times[k];
    const Tensor3Field gamma = christoffel(g);
    const ScalarDerivatives df = scalar_calculus(g, f[k], gamma);
    const ScalarDerivatives dF = scalar_calculus(g, F[k], gamma);
    const ScalarField Ft = time_derivative(Fe, times, k);
    const Ricci ric = ricci(g, gamma);
    const bool with_h = s.h && n == 3;
    SymTensorField h2(grid);
    CovectorField div_h2(grid), grad_tr_h2(grid);
    if (with_h) {
      h2 = hform_ops(g, *s.h).h_sq;
      div_h2 = tensor_calculus(g, h2, gamma).div;
      grad_tr_h2 = gradient(trace_g(g, h2));
    }
    std::vector<double> res(grid.size());
    parallel_for(grid.size(), [&](std::size_t p) {
      const SmallMatrix<double> ginv = g.inverse_at(p);
      const SmallVector<double> dfv = df.grad.at(p), dFv = dF.grad.at(p);
      const SmallVector<double> up = ginv * dfv;  // grad f with the index raised
      const SmallMatrix<double> hess = df.hess.at(p), R = ric.ric.at(p), Hs = h2.at(p);
      const double lhs = dF.lap[p] - Ft[p];
      double rhs = -2.0 * up.dot(dFv);
      rhs += t * (2.0 * inner_g(ginv, hess, hess) + 2.0 * alpha * inner_g(ginv, SmallMatrix<double>(R - 0.25 * Hs), hess));
      rhs += t * (2.0 * alpha * up.dot(R * up) - 0.5 * alpha * up.dot(Hs * up) + 0.5 * up.dot(Hs * up));
      if (with_h) rhs += t * alpha * up.dot(0.25 * grad_tr_h2.at(p) - 0.5 * div_h2.at(p));
      rhs -= df.grad_sq[p] - alpha * ft[k][p];
      res[p] = std::abs(lhs - rhs);
    });
    double sup = 0.0;
    for (double v : res) sup = std::max(sup, v);
    out.times.push_back(t);
    out.values.push_back(sup);
  }
  return out;
}

// ---------------------------------------------------------------- geodesics

namespace {

using Vec = SmallVector<double>;

Vec to_vec(const Point& x, int n) {
  Vec v(n);
  for (int a = 0; a < n; ++a) v(a) = x[a];
  return v;
}

Point to_point(const Vec& v) {
  Point x{0.0, 0.0, 0.0};
  for (int a = 0; a < v.size(); ++a) x[a] = v(a);
  return x;
}

struct PathSample {
  SmallMatrix<double> g;
  std::array<SmallMatrix<double>, 3> dg;
};

double energy_of(const std::vector<Vec>& P, const std::vector<PathSample>& S, double ds) {
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < P.size(); ++i) {
    const Vec d = P[i + 1] - P[i];
    e += 0.5 * d.dot((S[i].g + S[i + 1].g) * d) / ds;
  }
  return e;
}

std::vector<PathSample> sample_path(const MetricField& g, const std::vector<Vec>& P) {
  std::vector<PathSample> S(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) S[i].g = sample_metric(g, point_stencil(g.grid(), to_point(P[i])), &S[i].dg);
  return S;
}

// Solves tridiag(-1, 2, -1) v = r / ... in place for one coordinate (Dirichlet ends).
void solve_second_difference(std::vector<double>& r, double ds) {
  const std::size_t m = r.size();
  if (m == 0) return;
  std::vector<double> c(m);
  double denom = 2.0;
  c[0] = -1.0 / denom;
  r[0] /= denom;
  for (std::size_t i = 1; i < m; ++i) {
    denom = 2.0 + c[i - 1];
    c[i] = -1.0 / denom;
    r[i] = (r[i] + r[i - 1]) / denom;
  }
  for (std::size_t i = m - 1; i-- > 0;) r[i] -= c[i] * r[i + 1];
  for (double& v : r) v *= ds;
}

}  // namespace

double path_energy(const MetricField& g, const std::vector<Point>& points) {
  if (points.size() < 2) throw ParameterError("a path needs at least two samples");
  std::vector<Vec> P;
  for (const Point& x : points) P.push_back(to_vec(x, g.dim()));
  return energy_of(P, sample_path(g, P), 1.0 / static_cast<double>(points.size() - 1));
}

GeodesicPath geodesic(const MetricField& g, const Point& x, const Point& y, int samples, double reference_time,
                      const GeodesicOptions& opts) {
  if (samples < 3) throw ParameterError("geodesic needs at least 3 samples");
  const GridSpec& grid = g.grid();
  const int n = grid.dim();
  Vec start = to_vec(y, n), end = to_vec(x, n);
  for (int a = 0; a < n; ++a) {
    const double L = grid.side(a);
    end(a) = start(a) + (end(a) - start(a)) - L * std::round((end(a) - start(a)) / L);
  }
  if ((end - start).norm() == 0.0) throw ParameterError("geodesic endpoints must differ");
  const int m = samples - 1;
  const double ds = 1.0 / m;
  std::vector<Vec> P(samples);
  for (int i = 0; i <= m; ++i) P[i] = start + (end - start) * (i * ds);

  std::vector<PathSample> S = sample_path(g, P);
  double E = energy_of(P, S, ds);
  GeodesicPath out{x, y, {}, reference_time, 0.0, 0.0, 0, 0.0};
  double vnorm = std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, (end - start).norm());
  for (int it = 0; it < opts.max_iterations; ++it) {
    // Gradient of the energy in the interior samples.
    std::vector<Vec> grad(m - 1, Vec::Zero(n));
    for (int i = 1; i < m; ++i) {
      const Vec dm = P[i] - P[i - 1], dp = P[i + 1] - P[i];
      Vec gr = ((S[i - 1].g + S[i].g) * dm - (S[i].g + S[i + 1].g) * dp) / ds;
      for (int a = 0; a < n; ++a) gr(a) += 0.5 * (dm.dot(S[i].dg[a] * dm) + dp.dot(S[i].dg[a] * dp)) / ds;
      grad[i - 1] = gr;
    }
    // Sobolev preconditioning with the path's second-difference operator.
    std::vector<Vec> v(m - 1, Vec::Zero(n));
    for (int a = 0; a < n; ++a) {
      std::vector<double> r(m - 1);
      for (int i = 0; i < m - 1; ++i) r[i] = grad[i](a);
      solve_second_difference(r, ds);
      for (int i = 0; i < m - 1; ++i) v[i](a) = r[i];
    }
    double slope = 0.0;
    vnorm = 0.0;
    for (int i = 0; i < m - 1; ++i) {
      slope += grad[i].dot(v[i]);
      vnorm = std::max(vnorm, v[i].cwiseAbs().maxCoeff());
    }
    out.iterations = it;
    if (vnorm <= opts.tolerance * scale) break;
    double tau = 0.5;
    bool accepted = false;
    std::vector<Vec> trial = P;
    std::vector<PathSample> trial_s;
    while (tau > 1e-12) {
      for (int i = 1; i < m; ++i) trial[i] = P[i] - tau * v[i - 1];
      trial_s = sample_path(g, trial);
      const double Et = energy_of(trial, trial_s, ds);
      if (Et <= E - 1e-4 * tau * slope) {
        P = trial;
        S = std::move(trial_s);
        E = Et;
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      // No representable descent left; accept if the step is at rounding level.
      if (vnorm <= 1e-6 * scale) break;
      throw SolverError("geodesic line search stalled", vnorm);
    }
    if (it + 1 == opts.max_iterations) throw SolverError("geodesic did not converge", vnorm);
  }
  out.gradient_norm = vnorm;
  out.energy = E;
  for (int i = 0; i <= m; ++i) {
    out.points.push_back(to_point(P[i]));
    if (i < m) {
      const Vec d = P[i + 1] - P[i];
      out.length += std::sqrt(d.dot(0.5 * (S[i].g + S[i + 1].g) * d));
    }
  }
  return out;
}

// ------------------------------------------------------------------ Harnack

namespace {

struct HarnackSample {
  double slack, budget, lhs, rhs;
};

HarnackSample harnack_one(const ScalarEvolution& u, const TrajectoryInterpolator& interp, const Point& x, double t1,
                          const Point& y, double t2, const LiYauParams& p, const LiYauConstants& c,
                          const BudgetPolicy& policy, int path_samples) {
  const Trajectory& traj = u.trajectory();
  if (!(t1 > 0.0) || !(t1 < t2)) throw ParameterError("Harnack check needs 0 < t1 < t2");
  const std::size_t k1 = traj.index_of(t1), k2 = traj.index_of(t2);
  if (k2 >= u.size()) throw ParameterError("t2 lies beyond the solution");
  const int n = traj.dim();
  const double dt = t2 - t1;

  // gamma(0) = y at t2, gamma(1) = x at t1; |gamma'(s)| is measured at (1-s) t2 + s t1.
  double path_term = 0.0;
  bool same = true;
  for (int a = 0; a < n; ++a) same = same && x[a] == y[a];
  if (!same) {
    const double tmid = 0.5 * (t1 + t2);
    const GeodesicPath path = geodesic(interp.state(tmid).g, x, y, path_samples, tmid);
    const int m = path_samples - 1;
    const double ds = 1.0 / m;
    std::vector<double> speed(path_samples);
    for (int i = 0; i <= m; ++i) {
      Vec d(n);
      for (int a = 0; a < n; ++a) {
        const auto& P = path.points;
        if (i == 0)
          d(a) = (-3.0 * P[0][a] + 4.0 * P[1][a] - P[2][a]) / (2.0 * ds);
        else if (i == m)
          d(a) = (3.0 * P[m][a] - 4.0 * P[m - 1][a] + P[m - 2][a]) / (2.0 * ds);
        else
          d(a) = (P[i + 1][a] - P[i - 1][a]) / (2.0 * ds);
      }
      const double s = i * ds;
      speed[i] = d.dot(interp.metric_at((1.0 - s) * t2 + s * t1, path.points[i]) * d);
    }
    for (int i = 0; i < m; ++i) path_term += 0.5 * (speed[i] + speed[i + 1]) * ds;
    path_term *= p.alpha / (4.0 * dt);
  }
  const double r = std::sqrt(n * p.alpha / (2.0 * p.a));
  const double exponent = path_term + 2.0 / p.alpha * r * std::sqrt(c.B3) * (std::sqrt(t2) - std::sqrt(t1)) +
                          dt / p.alpha * r * std::sqrt(c.B1);
  const double lhs = sample(u[k1], x);
  const double rhs = sample(u[k2], y) * std::pow(t2 / t1, harnack_xi(n, p, c) / p.alpha) * std::exp(exponent);
  const double budget = policy.budget(traj, std::max(std::abs(lhs), std::abs(rhs)));
  return {rhs - lhs, budget, lhs, rhs};
}

EstimateReport harnack_report(const std::vector<HarnackSample>& samples, const std::vector<SpacetimePoint>& xs,
                              const std::vector<SpacetimePoint>& ys) {
  EstimateReport r;
  r.check = "harnack";
  std::size_t worst = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double ratio = samples[i].slack / std::max(samples[i].budget, std::numeric_limits<double>::min());
    if (!(ratio >= worst_ratio)) {
      worst_ratio = ratio;
      worst = i;
    }
  }
  r.samples = samples.size();
  r.worst_slack = samples[worst].slack;
  r.budget = samples[worst].budget;
  r.location = xs[worst];
  r.verdict = classify(r.worst_slack, r.budget);
  r.details = {{"y", ys[worst].x}, {"t2", ys[worst].t}, {"lhs", samples[worst].lhs}, {"rhs", samples[worst].rhs}};
  std::size_t violated = 0, inconclusive = 0;
  for (const HarnackSample& s : samples) {
    const Verdict v = classify(s.slack, s.budget);
    violated += v == Verdict::violated;
    inconclusive += v == Verdict::inconclusive;
  }
  r.details["violated_samples"] = violated;
  r.details["inconclusive_samples"] = inconclusive;
  return r;
}

}  // namespace

EstimateReport harnack_check(const ScalarEvolution& u, const Point& x, double t1, const Point& y, double t2,
                             const LiYauParams& p, const CurvatureBounds& kb, const BudgetPolicy& policy,
                             int path_samples) {
  require_positive_evolution(u);
  const LiYauConstants c = liyau_constants(u.trajectory().dim(), p, kb);
  const TrajectoryInterpolator interp(u.trajectory_ptr());
  const HarnackSample s = harnack_one(u, interp, x, t1, y, t2, p, c, policy, path_samples);
  return harnack_report({s}, {{t1, x}}, {{t2, y}});
}

EstimateReport harnack_sampled(const ScalarEvolution& u, const LiYauParams& p, const CurvatureBounds& kb, int count,
                               std::uint64_t seed, const BudgetPolicy& policy, int path_samples) {
  require_positive_evolution(u);
  if (count < 1) throw ParameterError("Harnack sampling needs at least one sample");
  if (u.size() < 3) throw ShapeError("Harnack sampling needs at least 3 snapshots");
  const Trajectory& traj = u.trajectory();
  const LiYauConstants c = liyau_constants(traj.dim(), p, kb);
  const TrajectoryInterpolator interp(u.trajectory_ptr());
  std::mt19937_64 rng(seed);
  const std::size_t last = u.size() - 1;
  std::vector<HarnackSample> samples;
  std::vector<SpacetimePoint> xs, ys;
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> first(1, last - 1);
    const std::size_t k1 = first(rng);
    std::uniform_int_distribution<std::size_t> second(k1 + 1, last);
    const std::size_t k2 = second(rng);
    Point x{0.0, 0.0, 0.0}, y{0.0, 0.0, 0.0};
    for (int a = 0; a < traj.dim(); ++a) {
      std::uniform_real_distribution<double> coord(0.0, traj.grid().side(a));
      x[a] = coord(rng);
      y[a] = coord(rng);
    }
    samples.push_back(harnack_one(u, interp, x, u.time(k1), y, u.time(k2), p, c, policy, path_samples));
    xs.push_back({u.time(k1), x});
    ys.push_back({u.time(k2), y});
  }
  EstimateReport r = harnack_report(samples, xs, ys);
  r.details["seed"] = seed;
  return r;
}

}  // namespace grf
