#pragma once

// Generalized Ricci flow on a 3-dimensional unimodular Lie group with a
// left-invariant diagonal metric a e1^2 + b e2^2 + c e3^2 in a Milnor frame,
// [e_i, e_j] = lambda_k eps_ijk e_k, and H = k e1^e2^e3.

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "grf/errors.hpp"
#include "grf/flow.hpp"
#include "grf/json_io.hpp"

namespace grf {

struct MilnorState {
  double a = 1.0, b = 1.0, c = 1.0;
  std::array<double, 3> lambda{0.0, 0.0, 0.0};
  double k = 0.0;
  double t = 0.0;

  std::array<double, 3> metric() const { return {a, b, c}; }
  void validate() const;
};

/// Named structure constants: su2 (2,2,2), heisenberg (2,0,0), abelian (0,0,0).
std::array<double, 3> structure_preset(const std::string& name);

/// Ric(e_i, e_i); the off-diagonal entries vanish for a Milnor frame.
std::array<double, 3> milnor_ricci(const MilnorState& s);

/// R = sum r_i / g_ii.
double milnor_scalar_curvature(const MilnorState& s);

/// H2(e_i, e_i) = k^2 / (g_jj g_kk) for {i, j, k} = {1, 2, 3}; H2 = |H|^2 g.
std::array<double, 3> milnor_h_sq(const MilnorState& s);

/// |H|^2 = k^2 / (abc) in the form norm.
double milnor_h_norm_sq(const MilnorState& s);

struct MilnorRhs {
  double da = 0.0, db = 0.0, dc = 0.0, dk = 0.0;
  double norm() const;
};

/// d g_ii = -2 r_i + 1/2 H2_ii, dk = 0 (d* H vanishes since *H is constant).
MilnorRhs homogeneous_rhs(const MilnorState& s);

/// k > 0 with Ric = 1/4 H2 for the given metric and structure constants, when
/// the three equations admit a common root. Throws ParameterError otherwise.
double bismut_flat_k(const MilnorState& s);

struct OdeControl {
  double tolerance = 1e-12;       // local error per step, relative to max(|y|, 1)
  double max_step = 1e-2;
  double output_interval = 0.01;  // states are recorded on this clock and at T
  bool adaptive = true;           // false: fixed steps of max_step, no error control
  /// Collapse is declared once the smallest coefficient falls below this
  /// fraction of its initial value.
  double collapse_fraction = 1e-9;
};

struct HomogeneousRun {
  std::vector<MilnorState> states;
  /// ln sqrt(abc) integrated as its own ODE from -R + 1/4 tr H2, alongside the state.
  std::vector<double> log_volume;
  int steps = 0;
  int rejected = 0;
};

/// Raised when a metric coefficient collapses; carries the run so far and the
/// collapse time extrapolated from the last step.
class HomogeneousCollapse : public SingularityError {
 public:
  HomogeneousCollapse(const std::string& what, double t, std::size_t coefficient, double collapse_time,
                      std::shared_ptr<const HomogeneousRun> partial)
      : SingularityError(what, t, coefficient), collapse_time_(collapse_time), partial_(std::move(partial)) {}
  double collapse_time() const { return collapse_time_; }
  const std::shared_ptr<const HomogeneousRun>& partial() const { return partial_; }

 private:
  double collapse_time_;
  std::shared_ptr<const HomogeneousRun> partial_;
};

/// RK4 with step doubling from s0 (at s0.t) to s0.t + T.
HomogeneousRun evolve_ode(const MilnorState& s0, double T, const OdeControl& ctrl = {});

struct HomogeneousReport {
  CurvatureBounds bounds;          // same definitions as the grid backend
  double volume_residual = 0.0;    // sup |ln sqrt(abc) - integrated log volume|
  double rhs_norm_max = 0.0;
  double drift = 0.0;              // sup |g(t) - g(0)|, |k(t) - k(0)|
  double trace_identity = 0.0;     // sup |tr_g H2 - 3 |H|^2|
  double k_change = 0.0;           // sup |k(t) - k(0)|
};

HomogeneousReport homogeneous_reports(const HomogeneousRun& run);

Json homogeneous_run_to_json(const HomogeneousRun& run);
Json homogeneous_report_to_json(const HomogeneousReport& r);

}  // namespace grf
