#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "grf/heat.hpp"
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

TrajPtr conformal_flow(int n, double horizon, int cadence) {
  const GridSpec grid = GridSpec::uniform(2, n);
  const MetricField g = testing::conformal_metric(
      grid, [](double x, double y, double) { return 0.1 * std::sin(kTwoPi * x) * std::cos(kTwoPi * y); }, 2);
  StepControl ctrl;
  ctrl.cadence = cadence;
  return std::make_shared<const Trajectory>(evolve(FlowState(g, std::nullopt, 0.0), horizon, ctrl));
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

ScalarField mode(const GridSpec& grid, double eps, int m = 1) {
  return make_scalar(grid, ScalarFamily{ScalarKind::single_mode, 1.0, eps, m, 0});
}

// Backward heat from a periodic Gaussian of variance w^2 stays a periodic
// Gaussian of variance w^2 + 2 (T' - t), unit mass on the unit torus.
double periodic_gaussian(double x, double var) {
  double s = 0.0;
  for (int j = -3; j <= 3; ++j) s += std::exp(-(x - 0.5 + j) * (x - 0.5 + j) / (2.0 * var));
  return s / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("heat: constant datum stays constant on an evolving metric") {
  const TrajPtr traj = conformal_flow(16, 0.01, 8);
  ScalarField u0(traj->grid());
  u0.values.setConstant(2.5);
  const ScalarEvolution u = solve_heat(traj, u0);
  REQUIRE(u.size() == traj->size());
  CHECK(u.direction() == Direction::forward);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(testing::max_abs(u[k].values.array() - 2.5) < 1e-12);
}

TEST_CASE("heat: single Fourier mode decays at rate 4 pi^2 on the flat torus") {
  const double T = 0.02, eps = 0.5;
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const TrajPtr traj = frozen_flat(2, n, T, 4);
    const ScalarEvolution u = solve_heat(traj, mode(traj->grid(), eps));
    double e = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double decay = std::exp(-4.0 * std::numbers::pi * std::numbers::pi * u.time(k));
      const ScalarField exact = mode(traj->grid(), eps * decay);
      e = std::max(e, testing::max_abs(u[k].values - exact.values));
    }
    err.push_back(e);
  }
  CHECK(err[2] < 1e-3);
  CHECK(testing::observed_order(err[0], err[1]) > 1.9);
  CHECK(testing::observed_order(err[1], err[2]) > 1.9);
}

TEST_CASE("heat: maximum principle on an evolving metric") {
  const TrajPtr traj = conformal_flow(24, 0.02, 16);
  ScalarField u0 = mode(traj->grid(), 0.6, 2);
  for (std::size_t p = 0; p < u0.size(); ++p) u0[p] += 0.3 * std::cos(kTwoPi * traj->grid().position(p)[1]);
  const ScalarEvolution u = solve_heat(traj, u0);
  for (std::size_t k = 1; k < u.size(); ++k) {
    CHECK(u[k].values.maxCoeff() <= u[k - 1].values.maxCoeff() + 1e-13);
    CHECK(u[k].values.minCoeff() >= u[k - 1].values.minCoeff() - 1e-13);
  }
}

TEST_CASE("heat: rejects non-positive data and flags positivity loss") {
  const TrajPtr traj = frozen_flat(2, 8, 0.01, 2);
  ScalarField u0(traj->grid());
  CHECK_THROWS_AS(solve_heat(traj, u0), ParameterError);

  // A hand-built clock with steps far beyond the explicit limit.
  const GridSpec grid = GridSpec::uniform(2, 16);
  const FlowState s0(MetricField::flat(grid), std::nullopt, 0.0), s1(MetricField::flat(grid), std::nullopt, 1.0);
  const auto wild = std::make_shared<const Trajectory>(Trajectory({s0, s1}, {0.5}, {2}, true));
  CHECK_THROWS_AS(solve_heat(wild, mode(grid, 0.5, 8)), InstabilityError);
}

TEST_CASE("conjugate: flat backward heat matches the spreading Gaussian") {
  const double Tp = 0.01, w = 0.08;
  std::vector<double> err;
  for (int n : {16, 32, 64}) {
    const TrajPtr traj = frozen_flat(2, n, 0.02, 8);
    const GridSpec& grid = traj->grid();
    const ScalarField terminal = make_terminal_profile(grid, TerminalFamily{TerminalKind::gaussian, 3.0, w}, 1);
    const ConjugateSolution sol = solve_conjugate(traj, terminal, Tp);
    REQUIRE(sol.terminal_index == 4);
    REQUIRE(sol.kernel.size() == 5);
    CHECK(sol.kernel.direction() == Direction::backward);
    const WeightedMeasure mu = weighted_measure(sol.kernel);
    CHECK(mu.max_mass_drift() <= 1e-6);
    double e = 0.0;
    for (std::size_t k = 0; k < sol.kernel.size(); ++k) {
      const double var = w * w + 2.0 * (Tp - sol.kernel.time(k));
      for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto x = grid.position(p);
        e = std::max(e, std::abs(sol.kernel[k][p] - periodic_gaussian(x[0], var)));
        // Symmetric about the centre line; x -> 1 - x maps cell i to n - i.
        const int i = static_cast<int>(std::lround(x[0] * n));
        if (i > 0) {
          const int j = static_cast<int>(std::lround(x[1] * n));
          const std::size_t q = grid.index(n - i, j);
          CHECK(sol.kernel[k][p] == doctest::Approx(sol.kernel[k][q]).epsilon(1e-12));
        }
      }
      // The density equals K when det g = 1.
      CHECK(testing::max_abs(mu.density[k].values - sol.kernel[k].values) < 1e-12);
    }
    // Spreads backward: the peak drops as t decreases.
    CHECK(sol.kernel[0].values.maxCoeff() < sol.kernel[4].values.maxCoeff());
    err.push_back(e);
  }
  CHECK(testing::observed_order(err[0], err[1]) > 1.8);
  CHECK(testing::observed_order(err[1], err[2]) > 1.9);
}

TEST_CASE("conjugate: constant terminal on a static flat metric stays constant") {
  const TrajPtr traj = frozen_flat(3, 8, 0.02, 4);
  ScalarField terminal(traj->grid());
  terminal.values.setConstant(3.0);
  const ConjugateSolution sol = solve_conjugate(traj, terminal, 0.015);
  for (std::size_t k = 0; k < sol.kernel.size(); ++k)
    CHECK(testing::max_abs(sol.kernel[k].values.array() - 1.0) < 1e-13);
  // f = -ln K - n/2 ln(4 pi (T' - t)) with K = 1.
  REQUIRE(sol.potential.size() == sol.terminal_index);
  const double f0 = -1.5 * std::log(4.0 * std::numbers::pi * 0.015);
  CHECK(sol.potential[0][0] == doctest::Approx(f0).epsilon(1e-13));
}

TEST_CASE("conjugate: unit mass is conserved along a flow with torsion") {
  const TrajPtr traj = generic_3d_flow(0.02, 8);
  const ScalarField terminal = make_terminal_profile(traj->grid(), TerminalFamily{}, 3);
  const ConjugateSolution sol = solve_conjugate(traj, terminal, traj->times()[6]);
  const WeightedMeasure mu = weighted_measure(sol.kernel);
  CHECK(mu.mass.back() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(mu.max_mass_drift() <= 1e-6);
  for (std::size_t k = 0; k < sol.kernel.size(); ++k) CHECK(sol.kernel[k].values.minCoeff() > 0.0);
}

TEST_CASE("conjugate: terminal time must be an interior snapshot") {
  const TrajPtr traj = frozen_flat(2, 8, 0.02, 4);
  const ScalarField terminal = make_terminal_profile(traj->grid(), TerminalFamily{}, 2);
  CHECK_THROWS_AS(solve_conjugate(traj, terminal, 0.02), ParameterError);
  CHECK_THROWS_AS(solve_conjugate(traj, terminal, 0.03), ParameterError);
  CHECK_THROWS_AS(solve_conjugate(traj, terminal, 0.0), ParameterError);
  CHECK_THROWS_AS(solve_conjugate(traj, terminal, 0.007), RangeError);
  ScalarField zero(traj->grid());
  CHECK_THROWS_AS(solve_conjugate(traj, zero, 0.01), ParameterError);
}

TEST_CASE("measure: evolution residual is second order in the snapshot spacing") {
  std::vector<double> res;
  for (int cadence : {16, 32, 64}) {
    const TrajPtr traj = conformal_flow(24, 0.01, cadence);
    const ScalarField terminal = make_terminal_profile(traj->grid(), TerminalFamily{}, 2);
    const ConjugateSolution sol = solve_conjugate(traj, terminal, traj->times()[cadence / 2]);
    res.push_back(measure_evolution_residual(weighted_measure(sol.kernel), sol.kernel).sup());
  }
  CHECK(testing::observed_order(res[0], res[1]) > 1.8);
  CHECK(testing::observed_order(res[1], res[2]) > 1.8);
}

TEST_CASE("duality: the pairing of u and K is constant in time") {
  std::vector<double> res;
  for (int cadence : {8, 16, 32}) {
    const TrajPtr traj = conformal_flow(24, 0.01, cadence);
    const ScalarEvolution u = solve_heat(traj, mode(traj->grid(), 0.5));
    const ScalarField terminal = make_terminal_profile(traj->grid(), TerminalFamily{}, 2);
    const ConjugateSolution sol = solve_conjugate(traj, terminal, traj->times()[cadence / 2]);
    res.push_back(duality_residual(u, sol.kernel).sup());
  }
  CHECK(res[2] < 1e-4);
  CHECK(testing::observed_order(res[0], res[1]) > 1.8);
  CHECK(testing::observed_order(res[1], res[2]) > 1.8);
}

TEST_CASE("heat: evolution export carries every snapshot") {
  const TrajPtr traj = frozen_flat(2, 8, 0.01, 2);
  ScalarField u0(traj->grid());
  u0.values.setOnes();
  const Json j = evolution_to_json(solve_heat(traj, u0));
  CHECK(j["direction"] == "forward");
  CHECK(j["times"].size() == 3);
  CHECK(j["values"].size() == 3);
}
