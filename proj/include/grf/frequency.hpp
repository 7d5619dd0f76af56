#pragma once

#include <Eigen/Sparse>

#include <memory>
#include <string>
#include <vector>

#include "grf/estimates.hpp"

namespace grf {

enum class HKind { constant, linear, exponential };

/// h(t) = p, p + q t, or p e^{q t}; h'/h is available in closed form.
struct HFunction {
  HKind kind = HKind::constant;
  double p = -1.0;
  double q = 0.0;

  double operator()(double t) const;
  double log_derivative(double t) const;
  /// Nonzero with a single sign on [t0, t1]; returns that sign.
  int sign_on(double t0, double t1) const;
};

HKind parse_h_kind(const std::string& s);

struct FrequencyParams {
  HFunction h;
  double t0 = 0.0;
  double t1 = 0.0;
};

struct FrequencyConstants {
  double C1 = 0.0, C2 = 0.0, C3 = 0.0;
  double A = 1.0, kappa = 1.0;
  double c(double t) const;
};

/// C1 = n/16 + 3 n K4^2 / 4, C2 = 16 n (K1 + K3/8)^2 + 8 n K + n K3^2 / 2,
/// C3 = 2 n (K1 + K3/8); A, kappa = max, min of u0. Constant u0 is rejected.
FrequencyConstants frequency_constants(int n, const CurvatureBounds& kb, const ScalarField& u0);

/// Integrand of -E: h'/h + 4n/s + ln(A/kappa)/s + sqrt(4 n C1) + sqrt(4 n C2)/s
/// + sqrt(4 n C3)/sqrt(s) + n c(s)/2.
double e_integrand(int n, const FrequencyParams& p, const FrequencyConstants& fc, double s);

/// E(t) = -int_{t0}^{t} e_integrand, composite Simpson in log s with enough
/// panels that the quadrature error sits far below the discretization error.
double frequency_exponent(int n, const FrequencyParams& p, const FrequencyConstants& fc, double t);

struct FrequencySeries {
  std::shared_ptr<const Trajectory> traj;
  FrequencyParams params;
  FrequencyConstants constants;
  std::size_t first = 0;  // snapshot index of t0
  std::vector<double> times, I, D, E, U, beta, h;
  std::vector<double> lambda_M;  // empty unless requested
};

/// The weighted Dirichlet form sum density g^ij d_i phi d_j phi as a sparse
/// matrix; A phi equals minus the flux operator with coefficient density g^-1.
Eigen::SparseMatrix<double> weighted_dirichlet_matrix(const MetricField& g, const ScalarField& density);

struct EigenOptions {
  double tolerance = 1e-11;
  int max_iterations = 500;
};

struct EigenResult {
  double lambda = 0.0;
  ScalarField eigenfunction;  // mean zero and unit norm in the weighted measure
  int iterations = 0;
  double residual = 0.0;
};

/// Smallest nonzero eigenvalue of the density-weighted Dirichlet form with the
/// density-mean-zero constraint, by shifted inverse iteration with CG solves.
EigenResult weighted_eigenvalue(const MetricField& g, const ScalarField& density, const EigenOptions& opts = {},
                                const ScalarField* warm_start = nullptr);

/// Rayleigh quotient of phi in the same discrete form.
double weighted_rayleigh_quotient(const MetricField& g, const ScalarField& density, const ScalarField& phi);

/// lambda_M at each window snapshot, warm-started from the previous one.
TimeSeries eigenvalue_series(const WeightedMeasure& mu, const FrequencyParams& p, const EigenOptions& opts = {});

/// I, D, E, beta, U on the window snapshots; D uses the carre du champ of the
/// metric's Laplacian so that I' = -2 D / h holds discretely up to time error.
FrequencySeries compute_series(const ScalarEvolution& u, const WeightedMeasure& mu, const FrequencyParams& p,
                               const FrequencyConstants& fc, bool with_eigenvalues = false);

/// Successive differences of U must be >= 0 for h < 0 and <= 0 for h > 0.
EstimateReport monotonicity_check(const FrequencySeries& s, const FrequencyParams& p,
                                  const BudgetPolicy& policy = {});

/// The same test applied to beta h lambda_M.
EstimateReport eigenvalue_monotonicity(const FrequencySeries& s, const FrequencyParams& p,
                                       const BudgetPolicy& policy = {});

/// |dI/dt + 2 D / h| at the interior window snapshots.
TimeSeries i_prime_identity(const FrequencySeries& s);

/// I(t) - exp{2 U(t0) int_{t0}^{t} -1/(h beta)} I(t0) at every window snapshot
/// after t0; the integral uses the same log-time Simpson rule as E.
EstimateReport integral_harnack_check(const FrequencySeries& s, const BudgetPolicy& policy = {});

/// Columns t, I, D, E, U, beta, lambda_M.
void write_frequency_csv(std::ostream& os, const FrequencySeries& s);

}  // namespace grf
