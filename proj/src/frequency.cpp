#include "grf/frequency.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "grf/errors.hpp"

namespace grf {

double HFunction::operator()(double t) const {
  switch (kind) {
    case HKind::constant: return p;
    case HKind::linear: return p + q * t;
    case HKind::exponential: return p * std::exp(q * t);
  }
  return p;
}

double HFunction::log_derivative(double t) const {
  switch (kind) {
    case HKind::constant: return 0.0;
    case HKind::linear: return q / (p + q * t);
    case HKind::exponential: return q;
  }
  return 0.0;
}

int HFunction::sign_on(double t0, double t1) const {
  // every family is monotone in t, so the endpoints decide
  const double a = (*this)(t0), b = (*this)(t1);
  if (!std::isfinite(a) || !std::isfinite(b) || a == 0.0 || b == 0.0 || (a > 0) != (b > 0))
    throw ParameterError("h must be nonzero with one sign on the frequency window");
  return a > 0 ? 1 : -1;
}

HKind parse_h_kind(const std::string& s) {
  if (s == "constant") return HKind::constant;
  if (s == "linear") return HKind::linear;
  if (s == "exponential") return HKind::exponential;
  throw ParameterError("unknown h family '" + s + "'");
}

double FrequencyConstants::c(double t) const { return std::log(A / kappa) / t; }

FrequencyConstants frequency_constants(int n, const CurvatureBounds& kb, const ScalarField& u0) {
  if (!u0.all_finite() || !(u0.values.minCoeff() > 0.0)) throw ParameterError("frequency needs a positive u0");
  FrequencyConstants fc;
  fc.A = u0.values.maxCoeff();
  fc.kappa = u0.values.minCoeff();
  if (!(fc.A > fc.kappa)) throw ParameterError("frequency needs a non-constant u0: c(t) vanishes identically");
  const double k13 = kb.K1 + kb.K3 / 8.0;
  fc.C1 = n / 16.0 + 0.75 * n * kb.K4 * kb.K4;
  fc.C2 = 16.0 * n * k13 * k13 + 8.0 * n * kb.K() + 0.5 * n * kb.K3 * kb.K3;
  fc.C3 = 2.0 * n * k13;
  return fc;
}

double e_integrand(int n, const FrequencyParams& p, const FrequencyConstants& fc, double s) {
  const double c = fc.c(s);
  return p.h.log_derivative(s) + 4.0 * n / s + c + std::sqrt(4.0 * n * fc.C1) + std::sqrt(4.0 * n * fc.C2) / s +
         std::sqrt(4.0 * n * fc.C3) / std::sqrt(s) + 0.5 * n * c;
}

namespace {

// Composite Simpson in v = ln s; the 1/s and 1/sqrt(s) terms become smooth.
template <class F>
double log_simpson(F&& f, double a, double b, int panels = 256) {
  if (b == a) return 0.0;
  const double len = std::log(b / a), dv = len / panels;
  double sum = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double s = a * std::exp(i * dv);
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * f(s) * s;
  }
  return sum * dv / 3.0;
}

}  // namespace

double frequency_exponent(int n, const FrequencyParams& p, const FrequencyConstants& fc, double t) {
  if (!(p.t0 > 0.0) || !(t >= p.t0)) throw RangeError("frequency exponent is defined for t >= t0 > 0");
  return -log_simpson([&](double s) { return e_integrand(n, p, fc, s); }, p.t0, t);
}

// ---------------------------------------------------------------------------
// weighted eigenvalue

Eigen::SparseMatrix<double> weighted_dirichlet_matrix(const MetricField& g, const ScalarField& density) {
  const GridSpec& grid = g.grid();
  require_same_grid(grid, density.grid, "density");
  const int n = grid.dim();
  SymTensorField c(grid);
  c.values = g.inverse().values;
  for (std::size_t p = 0; p < grid.size(); ++p) c.values.row(static_cast<Eigen::Index>(p)) *= density[p];

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(grid.size() * static_cast<std::size_t>(1 + 2 * n + 4 * n * (n - 1)));
  auto add = [&](std::size_t r, std::size_t col, double v) {
    trip.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
  };
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int i = 0; i < n; ++i) {
      const std::size_t pp = grid.neighbor(p, i, 1), pm = grid.neighbor(p, i, -1);
      const double hi = grid.spacing(i);
      const double up = 0.5 * (c.comp(p, i, i) + c.comp(pp, i, i)) / (hi * hi);
      const double down = 0.5 * (c.comp(p, i, i) + c.comp(pm, i, i)) / (hi * hi);
      add(p, p, up + down);
      add(p, pp, -up);
      add(p, pm, -down);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = 1.0 / (4.0 * hi * grid.spacing(j));
        const double cu = c.comp(pp, i, j) * w, cd = c.comp(pm, i, j) * w;
        add(p, grid.neighbor(pp, j, 1), -cu);
        add(p, grid.neighbor(pp, j, -1), cu);
        add(p, grid.neighbor(pm, j, 1), cd);
        add(p, grid.neighbor(pm, j, -1), -cd);
      }
    }
  }
  const auto N = static_cast<int>(grid.size());
  Eigen::SparseMatrix<double> a(N, N);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

namespace {

void deflate(Eigen::VectorXd& v, const Eigen::VectorXd& rho) { v.array() -= v.dot(rho) / rho.sum(); }

double m_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& rho) {
  return std::sqrt((v.array().square() * rho.array()).sum());
}

}  // namespace

double weighted_rayleigh_quotient(const MetricField& g, const ScalarField& density, const ScalarField& phi) {
  const Eigen::SparseMatrix<double> a = weighted_dirichlet_matrix(g, density);
  Eigen::VectorXd v = phi.values;
  deflate(v, density.values);
  const double den = std::pow(m_norm(v, density.values), 2);
  if (!(den > 0.0)) throw ParameterError("Rayleigh quotient of a constant function");
  return v.dot(a * v) / den;
}

EigenResult weighted_eigenvalue(const MetricField& g, const ScalarField& density, const EigenOptions& opts,
                                const ScalarField* warm_start) {
  if (!(density.values.minCoeff() > 0.0)) throw ParameterError("weighted eigenvalue needs a positive density");
  const GridSpec& grid = g.grid();
  const Eigen::VectorXd& rho = density.values;
  const Eigen::SparseMatrix<double> a = weighted_dirichlet_matrix(g, density);
  const Eigen::Index N = rho.size();

  // Small shift keeps the solve definite; constants are projected out anyway.
  double lmax = 0.0;
  for (int i = 0; i < grid.dim(); ++i) lmax = std::max(lmax, grid.side(i));
  const double sigma = 1.0 / (lmax * lmax);
  Eigen::SparseMatrix<double> shifted = a;
  for (Eigen::Index p = 0; p < N; ++p) shifted.coeffRef(p, p) += sigma * rho[p];
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(1e-13);
  cg.setMaxIterations(4000);
  cg.compute(shifted);
  if (cg.info() != Eigen::Success) throw SolverError("eigenvalue preconditioner failed", 0.0);

  // Block inverse iteration with Rayleigh-Ritz: the low spectrum of a nearly
  // symmetric torus clusters, and a single vector would crawl through it.
  const int block = std::min<Eigen::Index>(2 * grid.dim() + 2, N - 1);
  Eigen::MatrixXd v(N, block);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (Eigen::Index p = 0; p < N; ++p)
    for (int c = 0; c < block; ++c) v(p, c) = dist(rng);
  if (warm_start) {
    require_same_grid(grid, warm_start->grid, "warm start");
    v.col(0) = warm_start->values;
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(block, 0.0);

  EigenResult out;
  double lambda = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Eigen::MatrixXd w(N, block);
    for (int c = 0; c < block; ++c) {
      Eigen::VectorXd col = v.col(c);
      deflate(col, rho);
      const double guess = it == 1 ? 1.0 : 1.0 / (theta[c] + sigma);
      Eigen::VectorXd x = cg.solveWithGuess(rho.cwiseProduct(col), guess * col);
      deflate(x, rho);
      w.col(c) = x / m_norm(x, rho);
    }
    const Eigen::MatrixXd ka = w.transpose() * (a * w);
    const Eigen::MatrixXd mb = w.transpose() * rho.asDiagonal() * w;
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (ka + ka.transpose()),
                                                                          0.5 * (mb + mb.transpose()));
    if (ritz.info() != Eigen::Success) throw SolverError("Rayleigh-Ritz step failed", residual);
    theta = ritz.eigenvalues();
    v = w * ritz.eigenvectors();
    const Eigen::VectorXd v0 = v.col(0);
    const double next = theta[0];
    residual = m_norm((a * v0 - next * rho.cwiseProduct(v0)).cwiseQuotient(rho), rho) / next;
    const bool settled = std::abs(next - lambda) <= opts.tolerance * next;
    lambda = next;
    out.iterations = it;
    if (settled && residual <= std::sqrt(opts.tolerance)) {
      out.lambda = lambda;
      out.residual = residual;
      out.eigenfunction = ScalarField(grid, v0 / m_norm(v0, rho));
      return out;
    }
  }
  throw SolverError("weighted eigenvalue iteration did not converge", residual);
}

TimeSeries eigenvalue_series(const WeightedMeasure& mu, const FrequencyParams& p, const EigenOptions& opts) {
  const Trajectory& traj = *mu.traj;
  const std::size_t k0 = traj.index_of(p.t0), k1 = traj.index_of(p.t1);
  if (k1 >= mu.size()) throw RangeError("frequency window extends past the conjugate terminal time");
  TimeSeries s;
  ScalarField warm;
  for (std::size_t k = k0; k <= k1; ++k) {
    const EigenResult r = weighted_eigenvalue(traj[k].g, mu.density[k], opts, k > k0 ? &warm : nullptr);
    warm = r.eigenfunction;
    s.times.push_back(traj.times()[k]);
    s.values.push_back(r.lambda);
  }
  return s;
}

// ---------------------------------------------------------------------------
// series and checks

FrequencySeries compute_series(const ScalarEvolution& u, const WeightedMeasure& mu, const FrequencyParams& p,
                               const FrequencyConstants& fc, bool with_eigenvalues) {
  if (mu.traj.get() != u.trajectory_ptr().get()) throw ParameterError("u and the measure must share a trajectory");
  const Trajectory& traj = u.trajectory();
  if (!(p.t0 > 0.0) || !(p.t1 > p.t0)) throw ParameterError("frequency window needs 0 < t0 < t1");
  const std::size_t k0 = traj.index_of(p.t0), k1 = traj.index_of(p.t1);
  if (k1 >= mu.size() || k1 >= u.size()) throw RangeError("frequency window extends past the available data");
  if (k1 - k0 < 2) throw ParameterError("frequency window needs at least 3 snapshots");
  p.h.sign_on(p.t0, p.t1);
  const int n = traj.dim();

  FrequencySeries s;
  s.traj = u.trajectory_ptr();
  s.params = p;
  s.constants = fc;
  s.first = k0;
  for (std::size_t k = k0; k <= k1; ++k) {
    const double t = traj.times()[k];
    const double hk = p.h(t);
    const ScalarField gamma = LaplaceOperator(traj[k].g).carre_du_champ(u[k]);
    const ScalarField sq(u[k].grid, u[k].values.array().square().matrix());
    s.times.push_back(t);
    s.h.push_back(hk);
    s.I.push_back(mu.integrate(k, sq));
    s.D.push_back(hk * mu.integrate(k, gamma));
    s.E.push_back(frequency_exponent(n, p, fc, t));
    s.beta.push_back(std::exp(s.E.back()));
    s.U.push_back(s.beta.back() * s.D.back() / s.I.back());
  }
  if (with_eigenvalues) s.lambda_M = eigenvalue_series(mu, p).values;
  return s;
}

namespace {

EstimateReport monotone_report(const std::string& name, const FrequencySeries& s, const std::vector<double>& q,
                               int sign, const BudgetPolicy& policy) {
  EstimateReport r;
  r.check = name;
  r.worst_slack = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (double v : q) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k + 1 < q.size(); ++k) {
    // increasing for h < 0, decreasing for h > 0
    const double lhs = sign * (q[k + 1] - q[k]);
    r.lhs.times.push_back(s.times[k + 1]);
    r.lhs.values.push_back(lhs);
    r.rhs.times.push_back(s.times[k + 1]);
    r.rhs.values.push_back(0.0);
    if (!(-lhs >= r.worst_slack)) {
      r.worst_slack = -lhs;
      r.location.t = s.times[k + 1];
    }
  }
  r.samples = r.lhs.size();
  r.budget = policy.budget(*s.traj, scale);
  r.verdict = classify(r.worst_slack, r.budget);
  r.details = {{"h_sign", sign}, {"scale", scale}, {"t0", s.times.front()}, {"t1", s.times.back()}};
  return r;
}

int series_sign(const FrequencySeries& s) {
  if (s.h.empty()) throw ParameterError("empty frequency series");
  return s.h.front() > 0 ? 1 : -1;
}

}  // namespace

EstimateReport monotonicity_check(const FrequencySeries& s, const FrequencyParams& p, const BudgetPolicy& policy) {
  const int sign = p.h.sign_on(s.times.front(), s.times.back());
  return monotone_report("frequency_monotonicity", s, s.U, sign, policy);
}

EstimateReport eigenvalue_monotonicity(const FrequencySeries& s, const FrequencyParams& p,
                                       const BudgetPolicy& policy) {
  if (s.lambda_M.size() != s.times.size()) throw ParameterError("series has no eigenvalues");
  const int sign = p.h.sign_on(s.times.front(), s.times.back());
  std::vector<double> q(s.times.size());
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = s.beta[k] * s.h[k] * s.lambda_M[k];
  return monotone_report("eigenvalue_monotonicity", s, q, sign, policy);
}

TimeSeries i_prime_identity(const FrequencySeries& s) {
  TimeSeries r;
  for (std::size_t k = 1; k + 1 < s.times.size(); ++k) {
    const DerivativeStencil st = time_derivative_stencil(s.times, k);
    double di = 0.0;
    for (int j = 0; j < 3; ++j) di += st.weight[j] * s.I[st.index[j]];
    r.times.push_back(s.times[k]);
    r.values.push_back(std::abs(di + 2.0 * s.D[k] / s.h[k]));
  }
  return r;
}

EstimateReport integral_harnack_check(const FrequencySeries& s, const BudgetPolicy& policy) {
  series_sign(s);
  const int n = s.traj->dim();
  const FrequencyParams& p = s.params;
  auto weight = [&](double t) { return -1.0 / (p.h(t) * std::exp(frequency_exponent(n, p, s.constants, t))); };
  EstimateReport r;
  r.check = "integral_harnack";
  r.worst_slack = std::numeric_limits<double>::infinity();
  double integral = 0.0;
  for (std::size_t k = 1; k < s.times.size(); ++k) {
    integral += log_simpson(weight, s.times[k - 1], s.times[k], 64);
    const double bound = std::exp(2.0 * s.U.front() * integral) * s.I.front();
    r.lhs.times.push_back(s.times[k]);
    r.lhs.values.push_back(bound);
    r.rhs.times.push_back(s.times[k]);
    r.rhs.values.push_back(s.I[k]);
    const double slack = s.I[k] - bound;
    if (!(slack >= r.worst_slack)) {
      r.worst_slack = slack;
      r.location.t = s.times[k];
    }
  }
  r.samples = r.lhs.size();
  r.budget = policy.budget(*s.traj, s.I.front());
  r.verdict = classify(r.worst_slack, r.budget);
  r.details = {{"U_t0", s.U.front()}, {"I_t0", s.I.front()}, {"I_t1", s.I.back()}};
  return r;
}

void write_frequency_csv(std::ostream& os, const FrequencySeries& s) {
  os << "t,I,D,E,U,beta,lambda_M\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const double lam = k < s.lambda_M.size() ? s.lambda_M[k] : std::numeric_limits<double>::quiet_NaN();
    os << format_double(s.times[k]) << ',' << format_double(s.I[k]) << ',' << format_double(s.D[k]) << ','
       << format_double(s.E[k]) << ',' << format_double(s.U[k]) << ',' << format_double(s.beta[k]) << ','
       << format_double(lam) << '\n';
  }
}

}  // namespace grf
