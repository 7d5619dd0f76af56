#include <doctest.h>

#include <cmath>
#include <random>

#include "grf/geometry.hpp"
#include "grf/homogeneous.hpp"
#include "lie_oracle.hpp"

using namespace grf;

namespace {

MilnorState state(std::array<double, 3> g, std::array<double, 3> lambda, double k = 0.0) {
  MilnorState s;
  s.a = g[0];
  s.b = g[1];
  s.c = g[2];
  s.lambda = lambda;
  s.k = k;
  return s;
}

MilnorState round_su2() { return state({1, 1, 1}, structure_preset("su2")); }

double distance(const MilnorState& x, const MilnorState& y) {
  return std::max({std::abs(x.a - y.a), std::abs(x.b - y.b), std::abs(x.c - y.c), std::abs(x.k - y.k)});
}

}  // namespace

TEST_CASE("homogeneous: oracle sanity on the round three-sphere") {
  // [e_i, e_j] = 2 eps_ijk e_k with the unit metric is the unit sphere: Ric = 2 g.
  const auto ric = testing::coframe_ricci({1, 1, 1}, {2, 2, 2});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(ric[i][j] == doctest::Approx(i == j ? 2.0 : 0.0));
}

TEST_CASE("homogeneous: Milnor Ricci agrees with the Koszul oracle on random states") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(0.2, 3.0), lam(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::array<double, 3> g{pos(rng), pos(rng), pos(rng)};
    const std::array<double, 3> l{lam(rng), lam(rng), lam(rng)};
    const auto closed = milnor_ricci(state(g, l));
    const auto brute = testing::coframe_ricci(g, l);
    double scale = 1.0;
    for (int i = 0; i < 3; ++i) scale = std::max(scale, std::abs(brute[i][i]));
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(closed[i] - brute[i][i]) <= 1e-12 * scale);
      for (int j = 0; j < 3; ++j)
        if (j != i) CHECK(std::abs(brute[i][j]) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("homogeneous: presets and trivial cases") {
  CHECK(structure_preset("heisenberg") == std::array<double, 3>{2, 0, 0});
  CHECK_THROWS_AS(structure_preset("sl2"), ParameterError);
  const auto flat = milnor_ricci(state({1.3, 0.7, 2.0}, structure_preset("abelian")));
  for (double r : flat) CHECK(r == 0.0);
  const MilnorRhs z = homogeneous_rhs(state({1.3, 0.7, 2.0}, {0, 0, 0}));
  CHECK(z.norm() == 0.0);
  CHECK_THROWS_AS(homogeneous_rhs(state({1.0, -1.0, 1.0}, {0, 0, 0})), ParameterError);
}

TEST_CASE("homogeneous: relabeling (a, lambda1) <-> (b, lambda2) swaps r1 and r2") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0.2, 3.0), lam(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = pos(rng), b = pos(rng), c = pos(rng), l1 = lam(rng), l2 = lam(rng), l3 = lam(rng);
    const auto r = milnor_ricci(state({a, b, c}, {l1, l2, l3}));
    const auto s = milnor_ricci(state({b, a, c}, {l2, l1, l3}));
    CHECK(s[0] == doctest::Approx(r[1]).epsilon(1e-13));
    CHECK(s[1] == doctest::Approx(r[0]).epsilon(1e-13));
    CHECK(s[2] == doctest::Approx(r[2]).epsilon(1e-13));
  }
}

TEST_CASE("homogeneous: H2 by index summation and the trace identity") {
  const auto unit = milnor_h_sq(state({1, 1, 1}, {0, 0, 0}, 2.0));
  for (double v : unit) CHECK(v == doctest::Approx(4.0));
  CHECK(milnor_h_norm_sq(state({1, 1, 1}, {0, 0, 0}, 2.0)) == doctest::Approx(4.0));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::array<double, 3> g{pos(rng), pos(rng), pos(rng)};
    const double k = pos(rng) - 1.0;
    const MilnorState s = state(g, {0, 0, 0}, k);
    const auto h2 = milnor_h_sq(s);
    const auto brute = testing::brute_h_sq(g, k);
    double tr = 0.0;
    for (int i = 0; i < 3; ++i) {
      CHECK(h2[i] == doctest::Approx(brute[i][i]).epsilon(1e-13));
      for (int j = 0; j < 3; ++j)
        if (j != i) CHECK(brute[i][j] == 0.0);
      tr += h2[i] / g[i];
    }
    CHECK(tr == doctest::Approx(3.0 * milnor_h_norm_sq(s)).epsilon(1e-14));
  }
}

TEST_CASE("homogeneous: grid backend reproduces the same H2 for constant data") {
  const GridSpec grid = GridSpec::uniform(3, 8);
  const double a = 1.4, b = 0.6, c = 2.2, k = 1.3;
  SymTensorField s(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    s.comp(p, 0, 0) = a;
    s.comp(p, 1, 1) = b;
    s.comp(p, 2, 2) = c;
  }
  const MetricField g(std::move(s));
  ScalarField phi(grid);
  phi.values.setConstant(k);
  const HFormTerms terms = hform_ops(g, ThreeFormField(phi));
  const MilnorState m = state({a, b, c}, {0, 0, 0}, k);
  const auto h2 = milnor_h_sq(m);
  for (std::size_t p = 0; p < grid.size(); p += 37) {
    for (int i = 0; i < 3; ++i) CHECK(terms.h_sq.comp(p, i, i) == doctest::Approx(h2[i]).epsilon(1e-14));
    CHECK(terms.h_sq.comp(p, 0, 1) == 0.0);
    CHECK(terms.norm_h_sq[p] == doctest::Approx(milnor_h_norm_sq(m)).epsilon(1e-14));
    CHECK(trace_g(g, terms.h_sq)[p] == doctest::Approx(3.0 * terms.norm_h_sq[p]).epsilon(1e-14));
  }
  // abelian frame = flat torus: zero Ricci on both sides
  CHECK(ricci(g).ric.values.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("homogeneous: Bismut-flat fixed point on SU(2)") {
  MilnorState s = round_su2();
  const double ks = bismut_flat_k(s);
  CHECK(ks * ks == doctest::Approx(8.0).epsilon(1e-14));
  // from the oracle: r_i = 2, so k^2 = 4 r_i abc / g_i
  const auto ric = testing::coframe_ricci({1, 1, 1}, {2, 2, 2});
  CHECK(ks * ks == doctest::Approx(4.0 * ric[0][0]).epsilon(1e-13));
  s.k = ks;
  CHECK(homogeneous_rhs(s).norm() < 1e-10);
  const HomogeneousRun run = evolve_ode(s, 0.5);
  CHECK(run.states.back().t == doctest::Approx(0.5).epsilon(1e-15));
  for (const MilnorState& q : run.states) CHECK(distance(q, s) < 1e-8);
  const HomogeneousReport rep = homogeneous_reports(run);
  CHECK(rep.rhs_norm_max < 1e-10);
  CHECK(rep.drift < 1e-8);
  CHECK(rep.k_change == 0.0);
  // hand values: Ric/g = 2, H2/g = 8, so K1 = 0, K2 = 2T, K3 = 8T, K4 = 0
  CHECK(rep.bounds.K1 == 0.0);
  CHECK(rep.bounds.K2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.bounds.K3 == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(rep.bounds.K4 == 0.0);
  // Berger-squashed SU(2) is not Bismut-flat
  CHECK_THROWS_AS(bismut_flat_k(state({1, 1, 2}, {2, 2, 2})), ParameterError);
  CHECK_THROWS_AS(bismut_flat_k(state({1, 1, 1}, {0, 0, 0})), ParameterError);
}

TEST_CASE("homogeneous: round SU(2) collapses linearly at t = 1/4") {
  // r_i = 2 for every round metric, so da = -4 and a(t) = 1 - 4t
  try {
    evolve_ode(round_su2(), 0.5);
    FAIL("expected a collapse");
  } catch (const HomogeneousCollapse& e) {
    CHECK(std::abs(e.collapse_time() - 0.25) < 1e-6);
    REQUIRE(e.partial());
    for (const MilnorState& q : e.partial()->states) {
      CHECK(q.a == doctest::Approx(1.0 - 4.0 * q.t).epsilon(1e-10));
      CHECK(q.b == doctest::Approx(q.a).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(evolve_ode(round_su2(), 0.5), SingularityError);
}

TEST_CASE("homogeneous: fixed-step RK4 self-convergence") {
  const MilnorState s = state({1.0, 1.3, 0.8}, {2.0, 1.5, -0.5}, 0.7);
  std::vector<MilnorState> ends;
  for (double h : {0.02, 0.01, 0.005}) {
    OdeControl ctrl;
    ctrl.adaptive = false;
    ctrl.max_step = h;
    ctrl.output_interval = 0.2;
    ends.push_back(evolve_ode(s, 0.2, ctrl).states.back());
  }
  const double order = std::log2(distance(ends[0], ends[1]) / distance(ends[1], ends[2]));
  CHECK(order >= 3.7);
  CHECK(ends[2].k == s.k);
}

TEST_CASE("homogeneous: adaptive run agrees with a fine fixed-step run and keeps the volume identity") {
  const MilnorState s = state({1.0, 1.3, 0.8}, structure_preset("heisenberg"), 0.7);
  const HomogeneousRun run = evolve_ode(s, 0.3);
  OdeControl fine;
  fine.adaptive = false;
  fine.max_step = 1e-4;
  const HomogeneousRun ref = evolve_ode(s, 0.3, fine);
  REQUIRE(run.states.size() == ref.states.size());
  for (std::size_t q = 0; q < run.states.size(); ++q) CHECK(distance(run.states[q], ref.states[q]) < 1e-10);
  const HomogeneousReport rep = homogeneous_reports(run);
  CHECK(rep.volume_residual < 1e-10);
  CHECK(rep.trace_identity < 1e-12);
  CHECK(rep.k_change == 0.0);
  // Heisenberg: one positive and two negative Ricci directions
  CHECK(rep.bounds.K1 > 0.0);
  CHECK(rep.bounds.K2 > 0.0);
  const Json j = homogeneous_run_to_json(run);
  CHECK(j["states"].size() == run.states.size());
  CHECK(homogeneous_report_to_json(rep).contains("bounds"));
}

TEST_CASE("homogeneous: abelian flow without torsion is static with zero bounds") {
  const HomogeneousRun run = evolve_ode(state({1.2, 0.9, 1.1}, {0, 0, 0}), 0.5);
  const HomogeneousReport rep = homogeneous_reports(run);
  CHECK(rep.drift == 0.0);
  CHECK(rep.bounds.K1 == 0.0);
  CHECK(rep.bounds.K2 == 0.0);
  CHECK(rep.bounds.K3 == 0.0);
  CHECK(rep.bounds.K4 == 0.0);
  CHECK(rep.volume_residual < 1e-14);
  CHECK_THROWS_AS(evolve_ode(round_su2(), -1.0), ParameterError);
}
