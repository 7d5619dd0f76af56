#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "grf/frequency.hpp"
#include "grf/initial_data.hpp"
#include "test_support.hpp"

using namespace grf;
using grf::testing::kTwoPi;

namespace {

using TrajPtr = std::shared_ptr<const Trajectory>;

TrajPtr frozen_flat(int dim, int n, double horizon, int cadence) {
  const GridSpec grid = GridSpec::uniform(dim, n);
  StepControl ctrl;
  ctrl.cadence = cadence;
  return std::make_shared<const Trajectory>(
      Trajectory::frozen(FlowState(MetricField::flat(grid), std::nullopt, 0.0), horizon, ctrl));
}

TrajPtr generic_3d_flow(double horizon, int cadence) {
  const GridSpec grid = GridSpec::uniform(3, 8);
  std::mt19937_64 rng(7);
  const MetricField g = testing::random_metric(grid, rng, 0.1);
  const ThreeFormField h(testing::random_scalar(grid, rng, 0.3, 1.0));
  StepControl ctrl;
  ctrl.cadence = cadence;
  return std::make_shared<const Trajectory>(evolve(FlowState(g, h, 0.0), horizon, ctrl));
}

ScalarField mode(const GridSpec& grid, double eps) {
  return make_scalar(grid, ScalarFamily{ScalarKind::single_mode, 1.0, eps, 1, 0});
}

struct Run {
  TrajPtr traj;
  ScalarEvolution u;
  WeightedMeasure mu;
};

Run run_on(TrajPtr traj, const ScalarField& u0, const ScalarField& terminal, double tp) {
  ScalarEvolution u = solve_heat(traj, u0);
  const ConjugateSolution sol = solve_conjugate(traj, terminal, tp);
  return {traj, std::move(u), weighted_measure(sol.kernel)};
}

FrequencyParams window(double t0, double t1, double h = -1.0) {
  FrequencyParams p;
  p.h = HFunction{HKind::constant, h, 0.0};
  p.t0 = t0;
  p.t1 = t1;
  return p;
}

// Closed-form antiderivative of the E integrand for constant h.
double e_oracle(int n, const FrequencyConstants& fc, double t0, double t) {
  const double l = std::log(fc.A / fc.kappa);
  return -((4.0 * n + l * (1.0 + 0.5 * n) + std::sqrt(4.0 * n * fc.C2)) * std::log(t / t0) +
           std::sqrt(4.0 * n * fc.C1) * (t - t0) + 2.0 * std::sqrt(4.0 * n * fc.C3) * (std::sqrt(t) - std::sqrt(t0)));
}

double periodic_gaussian(double x, double var) {
  double s = 0.0;
  for (int j = -3; j <= 3; ++j) s += std::exp(-(x - 0.5 + j) * (x - 0.5 + j) / (2.0 * var));
  return s / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("frequency: constants by direct evaluation") {
  const GridSpec grid = GridSpec::uniform(3, 8);
  const ScalarField u0 = mode(grid, 0.3);
  const FrequencyConstants a = frequency_constants(3, CurvatureBounds{}, u0);
  CHECK(a.C1 == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK(a.C2 == 0.0);
  CHECK(a.C3 == 0.0);
  // K = max(K1^2, K2^2) = 0.01
  const FrequencyConstants b = frequency_constants(3, CurvatureBounds{0.1, 0.0, 0.0, 0.0}, u0);
  CHECK(b.C2 == doctest::Approx(0.72).epsilon(1e-14));
  CHECK(b.C3 == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(b.A == doctest::Approx(u0.values.maxCoeff()));
  CHECK(b.kappa == doctest::Approx(u0.values.minCoeff()));
  CHECK(b.c(2.0) == doctest::Approx(0.5 * std::log(b.A / b.kappa)));
}

TEST_CASE("frequency: constants coincide with the Li-Yau constants at alpha = 2") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.0, 2.0);
  const GridSpec grid = GridSpec::uniform(2, 8);
  const ScalarField u0 = mode(grid, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    const CurvatureBounds kb{d(rng), d(rng), d(rng), d(rng)};
    for (int n : {2, 3}) {
      const FrequencyConstants fc = frequency_constants(n, kb, u0);
      const LiYauConstants lc = liyau_constants(n, LiYauParams{}, kb);
      CHECK(fc.C1 == doctest::Approx(lc.B1).epsilon(1e-13));
      CHECK(fc.C2 == doctest::Approx(lc.B2).epsilon(1e-13));
      CHECK(fc.C3 == doctest::Approx(lc.B3).epsilon(1e-13));
      const double t = 0.1 + d(rng);
      const double env = 4.0 * n / t + std::sqrt(4.0 * n * fc.C1) + std::sqrt(4.0 * n * fc.C2) / t +
                         std::sqrt(4.0 * n * fc.C3) / std::sqrt(t);
      CHECK(liyau_rhs(n, LiYauParams{}, lc, t) == doctest::Approx(env).epsilon(1e-13));
    }
  }
}

TEST_CASE("frequency: constant u0 is rejected") {
  ScalarField u0(GridSpec::uniform(2, 8));
  u0.values.setConstant(2.0);
  CHECK_THROWS_AS(frequency_constants(2, CurvatureBounds{}, u0), ParameterError);
  u0[3] = -1.0;
  CHECK_THROWS_AS(frequency_constants(2, CurvatureBounds{}, u0), ParameterError);
}

TEST_CASE("frequency: h families and their log derivatives") {
  for (const HFunction h : {HFunction{HKind::constant, -2.0, 0.0}, HFunction{HKind::linear, 1.0, 3.0},
                            HFunction{HKind::exponential, -0.5, 1.7}}) {
    for (double t : {0.1, 0.4}) {
      const double e = 1e-6;
      const double fd = (std::log(std::abs(h(t + e))) - std::log(std::abs(h(t - e)))) / (2 * e);
      CHECK(h.log_derivative(t) == doctest::Approx(fd).epsilon(1e-8));
    }
  }
  CHECK(HFunction{HKind::linear, 1.0, -2.0}.sign_on(0.1, 0.4) == 1);
  CHECK(HFunction{HKind::exponential, -1.0, 5.0}.sign_on(0.1, 0.4) == -1);
  CHECK_THROWS_AS((HFunction{HKind::linear, 1.0, -4.0}.sign_on(0.1, 0.4)), ParameterError);
  CHECK_THROWS_AS((HFunction{HKind::constant, 0.0, 0.0}.sign_on(0.1, 0.4)), ParameterError);
  CHECK(parse_h_kind("exponential") == HKind::exponential);
  CHECK_THROWS_AS(parse_h_kind("cubic"), ParameterError);
}

TEST_CASE("frequency: constant u has zero frequency on a flow with torsion") {
  const TrajPtr traj = generic_3d_flow(0.02, 8);
  ScalarField one(traj->grid());
  one.values.setConstant(2.0);
  const Run r = run_on(traj, one, make_terminal_profile(traj->grid(), TerminalFamily{}, 3), traj->times()[6]);
  // constants come from a non-constant datum; the series itself uses u = 2
  const FrequencyConstants fc = frequency_constants(3, curvature_bounds(*traj), mode(traj->grid(), 0.2));
  const FrequencyParams p = window(traj->times()[1], traj->times()[6]);
  const FrequencySeries s = compute_series(r.u, r.mu, p, fc);
  REQUIRE(s.times.size() == 6);
  CHECK(s.E.front() == 0.0);
  CHECK(s.beta.front() == 1.0);
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    CHECK(std::abs(s.D[k]) < 1e-10);
    CHECK(std::abs(s.U[k]) < 1e-10);
    CHECK(s.I[k] == doctest::Approx(4.0 * r.mu.mass[s.first + k]).epsilon(1e-12));
  }
  const EstimateReport m = monotonicity_check(s, p);
  CHECK(m.verdict != Verdict::violated);
  CHECK(std::abs(m.worst_slack) < 1e-10);
  const EstimateReport ih = integral_harnack_check(s);
  CHECK(std::abs(ih.worst_slack) < 1e-5);
  CHECK(ih.verdict != Verdict::violated);
}

TEST_CASE("frequency: E matches its closed-form antiderivative") {
  const TrajPtr traj = frozen_flat(2, 16, 0.05, 40);
  const GridSpec& grid = traj->grid();
  const Run r = run_on(traj, mode(grid, 0.3), make_terminal_profile(grid, TerminalFamily{}, 2), 0.04);
  const FrequencyConstants fc = frequency_constants(2, CurvatureBounds{0.2, 0.1, 0.3, 0.05}, mode(grid, 0.3));
  const FrequencySeries s = compute_series(r.u, r.mu, window(0.01, 0.04), fc);
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    CHECK(s.E[k] == doctest::Approx(e_oracle(2, fc, 0.01, s.times[k])).epsilon(1e-10));
    CHECK(s.beta[k] > 0.0);
  }
}

TEST_CASE("frequency: flat oracle for U under a Gaussian measure") {
  // u = 1 + eps e^{-4 pi^2 t} sin(2 pi x), K a spreading Gaussian in x; I and
  // D by fine independent quadrature at three times.
  const double eps = 0.3, w = 0.1, tp = 0.03, eps_t = 1e-12;
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const TrajPtr traj = frozen_flat(2, n, 0.04, 8);
    const GridSpec& grid = traj->grid();
    TerminalFamily tf;
    tf.width = w;
    const Run r = run_on(traj, mode(grid, eps), make_terminal_profile(grid, tf, 1), tp);
    const FrequencyConstants fc = frequency_constants(2, CurvatureBounds{}, mode(grid, eps));
    const FrequencyParams p = window(0.005, tp);
    const FrequencySeries s = compute_series(r.u, r.mu, p, fc);
    double e = 0.0;
    for (std::size_t k : {std::size_t{0}, s.times.size() / 2, s.times.size() - 1}) {
      const double t = s.times[k], var = w * w + 2.0 * (tp - t), amp = eps * std::exp(-4.0 * std::numbers::pi * std::numbers::pi * t);
      const int m = 4000;
      double I = 0.0, G = 0.0;
      for (int q = 0; q < m; ++q) {
        const double x = (q + 0.5) / m, kx = periodic_gaussian(x, var);
        const double u = 1.0 + amp * std::sin(kTwoPi * x), ux = amp * kTwoPi * std::cos(kTwoPi * x);
        I += u * u * kx / m;
        G += ux * ux * kx / m;
      }
      const double U = -std::exp(e_oracle(2, fc, 0.005, t)) * G / I;
      CHECK(s.I[k] > 0.0);
      CHECK(s.D[k] < 0.0);
      e = std::max(e, std::abs(s.U[k] - U) / std::abs(U));
    }
    err.push_back(e + eps_t);
  }
  CHECK(err.back() < 2e-3);
  CHECK(testing::observed_order(err[1], err[2]) > 1.8);
}

TEST_CASE("eigenvalue: the Dirichlet matrix reproduces the flux operator") {
  const GridSpec grid = GridSpec::uniform(3, 8);
  std::mt19937_64 rng(3);
  const MetricField g = testing::random_metric(grid, rng, 0.15);
  const ScalarField rho = testing::random_scalar(grid, rng, 0.3, 1.0);
  const ScalarField v = testing::random_scalar(grid, rng, 1.0);
  const Eigen::SparseMatrix<double> a = weighted_dirichlet_matrix(g, rho);
  SymTensorField c(grid);
  c.values = g.inverse().values;
  for (std::size_t p = 0; p < grid.size(); ++p) c.values.row(static_cast<Eigen::Index>(p)) *= rho[p];
  const ScalarField ref = FluxOperator(c).apply(v);
  CHECK(testing::max_abs(a * v.values + ref.values) < 1e-10 * ref.values.cwiseAbs().maxCoeff());
  const Eigen::SparseMatrix<double> at = a.transpose();
  CHECK((a - at).norm() < 1e-12 * a.norm());
  CHECK(testing::max_abs(a * Eigen::VectorXd::Ones(grid.size())) < 1e-9);
}

TEST_CASE("eigenvalue: flat torus gives (2 pi / L)^2 to second order") {
  std::vector<double> err;
  for (int n : {8, 16, 32}) {
    const GridSpec grid(2, {n, n, 1}, {1.0, 2.0, 1.0});
    ScalarField rho(grid);
    rho.values.setConstant(0.5);
    // the longest axis sets the gap
    const EigenResult r = weighted_eigenvalue(MetricField::flat(grid), rho);
    CHECK(r.lambda > 0.0);
    const double exact = std::pow(kTwoPi / 2.0, 2);
    err.push_back(std::abs(r.lambda - exact) / exact);
  }
  CHECK(err.back() < 1e-2);
  CHECK(testing::observed_order(err[0], err[1]) > 1.9);
  CHECK(testing::observed_order(err[1], err[2]) > 1.9);
}

TEST_CASE("eigenvalue: self-consistency, scale invariance and warm start") {
  const TrajPtr traj = generic_3d_flow(0.02, 8);
  const GridSpec& grid = traj->grid();
  const ConjugateSolution sol = solve_conjugate(traj, make_terminal_profile(grid, TerminalFamily{}, 3), traj->times()[6]);
  const WeightedMeasure mu = weighted_measure(sol.kernel);
  const MetricField& g = (*traj)[2].g;
  const EigenResult r = weighted_eigenvalue(g, mu.density[2]);
  CHECK(r.lambda > 0.0);
  CHECK(weighted_rayleigh_quotient(g, mu.density[2], r.eigenfunction) == doctest::Approx(r.lambda).epsilon(1e-9));
  ScalarField scaled = r.eigenfunction;
  scaled.values *= 37.0;
  CHECK(weighted_rayleigh_quotient(g, mu.density[2], scaled) == doctest::Approx(r.lambda).epsilon(1e-9));
  const EigenResult again = weighted_eigenvalue(g, mu.density[2], {}, &scaled);
  CHECK(again.lambda == doctest::Approx(r.lambda).epsilon(1e-9));
  CHECK(again.iterations < r.iterations);
  // mean zero against the density
  CHECK(std::abs(r.eigenfunction.values.dot(mu.density[2].values)) < 1e-9 * mu.density[2].values.sum());
  // Any other mean-zero function has a larger quotient.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const ScalarField v = testing::random_scalar(grid, rng, 1.0);
    CHECK(weighted_rayleigh_quotient(g, mu.density[2], v) >= r.lambda * (1.0 - 1e-9));
  }
  ScalarField flat(grid);
  flat.values.setConstant(1.0);
  CHECK_THROWS_AS(weighted_rayleigh_quotient(g, mu.density[2], flat), ParameterError);
}

TEST_CASE("frequency: I' = -2D/h at second order in the snapshot spacing") {
  std::vector<double> res;
  for (int cadence : {8, 16, 32}) {
    const TrajPtr traj = generic_3d_flow(0.02, cadence);
    // fixed physical times at every level
    const Run r = run_on(traj, mode(traj->grid(), 0.3), make_terminal_profile(traj->grid(), TerminalFamily{}, 3),
                         0.0175);
    const FrequencyConstants fc = frequency_constants(3, curvature_bounds(*traj), mode(traj->grid(), 0.3));
    const FrequencyParams p = window(0.005, 0.015, 1.0);
    const TimeSeries ip = i_prime_identity(compute_series(r.u, r.mu, p, fc));
    res.push_back(ip.sup());
  }
  CHECK(res.back() < 1e-3);
  CHECK(testing::observed_order(res[1], res[2]) > 1.9);
}

TEST_CASE("frequency: monotonicity and integral Harnack for both signs of h") {
  const TrajPtr traj = generic_3d_flow(0.02, 8);
  const GridSpec& grid = traj->grid();
  const double tp = traj->times()[traj->size() - 2];
  const Run r = run_on(traj, mode(grid, 0.3), make_terminal_profile(grid, TerminalFamily{}, 3), tp);
  const FrequencyConstants fc = frequency_constants(3, curvature_bounds(*traj), mode(grid, 0.3));
  for (double sign : {-1.0, 1.0}) {
    CAPTURE(sign);
    FrequencyParams p = window(traj->times()[2], tp, sign);
    const FrequencySeries s = compute_series(r.u, r.mu, p, fc, true);
    for (std::size_t k = 0; k < s.times.size(); ++k) {
      CHECK(s.I[k] > 0.0);
      CHECK(s.D[k] * sign > 0.0);
      CHECK(s.lambda_M[k] > 0.0);
    }
    CHECK(monotonicity_check(s, p).verdict == Verdict::pass);
    CHECK(integral_harnack_check(s).verdict == Verdict::pass);
    const EstimateReport ev = eigenvalue_monotonicity(s, p);
    CHECK(ev.samples == s.times.size() - 1);
    CHECK(std::isfinite(ev.worst_slack));
  }
  // a linear h with a root inside the window is refused
  FrequencyParams bad = window(traj->times()[2], tp);
  bad.h = HFunction{HKind::linear, 1.0, -2.0 / (traj->times()[2] + tp)};
  CHECK_THROWS_AS(compute_series(r.u, r.mu, bad, fc), ParameterError);
  CHECK_THROWS_AS(compute_series(r.u, r.mu, window(traj->times()[2], traj->horizon()), fc), RangeError);
  CHECK_THROWS_AS(compute_series(r.u, r.mu, window(0.0, tp), fc), ParameterError);
}

TEST_CASE("frequency: CSV columns") {
  const TrajPtr traj = frozen_flat(2, 8, 0.02, 4);
  const Run r = run_on(traj, mode(traj->grid(), 0.3), make_terminal_profile(traj->grid(), TerminalFamily{}, 2), 0.015);
  const FrequencyConstants fc = frequency_constants(2, CurvatureBounds{}, mode(traj->grid(), 0.3));
  const FrequencySeries s = compute_series(r.u, r.mu, window(0.005, 0.015), fc, true);
  std::ostringstream os;
  write_frequency_csv(os, s);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,I,D,E,U,beta,lambda_M");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == static_cast<int>(s.times.size()));
}
