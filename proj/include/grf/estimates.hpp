#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "grf/heat.hpp"
#include "grf/sampling.hpp"

namespace grf {

/// alpha > 1, a, b > 0 with a + 2b = 1/alpha.
struct LiYauParams {
  double alpha = 2.0;
  double a = 0.25;
  double b = 0.125;

  void validate() const;
  /// The a = 2b member of the family for a given alpha.
  static LiYauParams balanced(double alpha);
};

struct LiYauConstants {
  double B1 = 0.0, B2 = 0.0, B3 = 0.0;
};

LiYauConstants liyau_constants(int n, const LiYauParams& p, const CurvatureBounds& kb);

/// Right-hand side of the Li-Yau bound at time t > 0.
double liyau_rhs(int n, const LiYauParams& p, const LiYauConstants& c, double t);

/// Harnack exponent xi = n alpha / 2a + sqrt(n alpha B2 / 2a).
double harnack_xi(int n, const LiYauParams& p, const LiYauConstants& c);

/// The closed-form envelope quoted for pure Ricci flow:
/// n alpha / (2 a t) + (1/t) sqrt(n^2 alpha^4 / (4 a^2 (alpha-1)^2) + n^2 alpha^2 K / (4 a b)).
double ricci_flow_envelope(int n, const LiYauParams& p, double K, double t);

enum class Verdict { pass, inconclusive, violated };
std::string to_string(Verdict v);

/// slack >= 0 passes; -budget <= slack < 0 is inconclusive; below that is a violation.
Verdict classify(double slack, double budget);

/// budget = c_b (h^2 + dt^2) scale, with h the largest grid spacing and dt the
/// largest snapshot spacing.
struct BudgetPolicy {
  double c_b = 10.0;
  double budget(const Trajectory& traj, double scale) const;
};

struct SpacetimePoint {
  double t = 0.0;
  Point x{0.0, 0.0, 0.0};
};

struct EstimateReport {
  std::string check;
  double worst_slack = 0.0;
  SpacetimePoint location;
  double budget = 0.0;
  Verdict verdict = Verdict::pass;
  std::size_t samples = 0;
  /// Per-time envelopes: lhs is the spatial max of the left side, rhs the bound.
  TimeSeries lhs, rhs;
  Json details = Json::object();
};

Json report_to_json(const EstimateReport& r);
/// Columns t, lhs, rhs, slack.
void write_series_csv(std::ostream& os, const EstimateReport& r);

/// |grad u|^2/u^2 - alpha d_t u / u against the bound, over all snapshots with t > 0.
EstimateReport liyau_check(const ScalarEvolution& u, const LiYauParams& p, const CurvatureBounds& kb,
                           const BudgetPolicy& policy = {});

/// P = t |grad u|^2 / u - u ln(A/u) <= 0 with A = max u(., 0). The worst slack
/// is -sup P over t > 0; details.initial_sup_p records sup P(., 0).
EstimateReport hamilton_check(const ScalarEvolution& u, const BudgetPolicy& policy = {});

/// P per snapshot, for oracles and plots.
std::vector<ScalarField> hamilton_quantity(const ScalarEvolution& u);

/// Sup-norm residual of (Lap - d_t) F minus the right side of the evolution
/// identity for F = t (|grad f|^2 - alpha d_t f), f = ln u, per snapshot.
/// Time derivatives are nested three-point differences; the last two
/// snapshots are left out because the nesting is only first order there.
TimeSeries lemma_residual(const ScalarEvolution& u, double alpha);

struct GeodesicOptions {
  double tolerance = 1e-8;  // max preconditioned step, relative to the endpoint distance
  int max_iterations = 2000;
};

struct GeodesicPath {
  Point x, y;
  std::vector<Point> points;  // gamma(s_i), s_i = i / (samples - 1); unwrapped coordinates
  double reference_time = 0.0;
  double energy = 0.0;  // sum g(d gamma, d gamma) / ds
  double length = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Discrete energy minimizer from y (s = 0) to the nearest periodic image of x
/// (s = 1), by preconditioned gradient descent from the straight segment.
/// Throws SolverError if it does not converge.
GeodesicPath geodesic(const MetricField& g, const Point& x, const Point& y, int samples,
                      double reference_time = 0.0, const GeodesicOptions& opts = {});

/// Discrete energy of an arbitrary sampled path in a fixed metric.
double path_energy(const MetricField& g, const std::vector<Point>& points);

/// u(x, t1) <= u(y, t2) (t2/t1)^(xi/alpha) exp{...} along the geodesic of the
/// mid-time metric. t1 < t2 must be snapshot times with t1 > 0.
EstimateReport harnack_check(const ScalarEvolution& u, const Point& x, double t1, const Point& y, double t2,
                             const LiYauParams& p, const CurvatureBounds& kb, const BudgetPolicy& policy = {},
                             int path_samples = 33);

/// Worst case over `count` seeded random spacetime pairs.
EstimateReport harnack_sampled(const ScalarEvolution& u, const LiYauParams& p, const CurvatureBounds& kb,
                               int count, std::uint64_t seed, const BudgetPolicy& policy = {},
                               int path_samples = 33);

}  // namespace grf
