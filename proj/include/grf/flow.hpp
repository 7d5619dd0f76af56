#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

#include "grf/geometry.hpp"
#include "grf/sampling.hpp"
#include "grf/timeseries.hpp"

namespace grf {

/// Instantaneous (g, H, t). In dimension 2, or whenever h is empty, H = 0.
struct FlowState {
  MetricField g;
  std::optional<ThreeFormField> h;
  double t = 0.0;

  FlowState() = default;
  FlowState(MetricField metric, std::optional<ThreeFormField> form, double time);

  const GridSpec& grid() const { return g.grid(); }
  int dim() const { return g.dim(); }
};

struct FlowRhs {
  SymTensorField dg;
  std::optional<ThreeFormField> dh;
};

/// dg = -2 Ric + 1/2 H2, dH = -d d* H.
FlowRhs grf_rhs(const FlowState& s);

/// Largest internal step allowed by the parabolic bound, cfl * h_min^2 * min lambda(g).
/// The leading symbol of the flow is g^ij d_i d_j, whose largest eigenvalue is 1 / min lambda(g).
double stable_dt(const FlowState& s, double cfl);

/// One classical RK4 step. The caller is responsible for respecting stable_dt.
/// Throws SingularityError if an intermediate or final metric is not SPD.
FlowState step(const FlowState& s, double dt);

struct StepControl {
  double cfl = 0.2;
  int cadence = 64;           // number of output intervals on [0, T]
  long max_substeps = 5'000'000;
};

/// Sampled solution on [0, T]. Snapshot k+1 was reached from snapshot k by
/// substeps[k] internal steps of size step_sizes[k].
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<FlowState> states, std::vector<double> step_sizes, std::vector<int> substeps,
             bool frozen = false);

  /// The same state at every output time; used for frozen-metric experiments.
  static Trajectory frozen(const FlowState& s, double horizon, const StepControl& ctrl = {});

  const std::vector<FlowState>& states() const { return states_; }
  const FlowState& operator[](std::size_t k) const { return states_[k]; }
  std::size_t size() const { return states_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& step_sizes() const { return step_sizes_; }
  const std::vector<int>& substeps() const { return substeps_; }
  double horizon() const { return times_.back(); }
  const GridSpec& grid() const { return states_.front().grid(); }
  int dim() const { return grid().dim(); }
  bool has_h() const { return states_.front().h.has_value(); }
  /// True when the metric is held fixed instead of following the flow.
  bool is_frozen() const { return frozen_; }

  /// Index of the snapshot at time t (relative tolerance 1e-9 of the horizon).
  std::size_t index_of(double t) const;

 private:
  std::vector<FlowState> states_;
  std::vector<double> times_;
  std::vector<double> step_sizes_;
  std::vector<int> substeps_;
  bool frozen_ = false;
};

/// Raised by evolve when the metric degenerates; carries the part computed so far.
class FlowAborted : public SingularityError {
 public:
  FlowAborted(const SingularityError& cause, std::shared_ptr<const Trajectory> partial)
      : SingularityError(cause), partial_(std::move(partial)) {}
  const std::shared_ptr<const Trajectory>& partial() const { return partial_; }

 private:
  std::shared_ptr<const Trajectory> partial_;
};

Trajectory evolve(const FlowState& s0, double horizon, const StepControl& ctrl = {});

/// Metric and 3-form at arbitrary times inside a trajectory, by cubic Hermite
/// interpolation with snapshot values and flow-RHS time derivatives.
class TrajectoryInterpolator {
 public:
  explicit TrajectoryInterpolator(std::shared_ptr<const Trajectory> traj);

  const Trajectory& trajectory() const { return *traj_; }
  FlowState state(double t) const;
  /// Metric components at one spacetime point, Catmull-Rom in space.
  SmallMatrix<double> metric_at(double t, const Point& x) const;

 private:
  struct Bracket {
    std::size_t k;
    double s, dt;
  };
  Bracket bracket(double t) const;

  std::shared_ptr<const Trajectory> traj_;
  std::vector<FlowRhs> rates_;
};

/// Per-snapshot sup-norm of d_t sqrt(det g) - (-R + 1/4 tr_g H2) sqrt(det g),
/// with d_t from three-point differences of the snapshots.
TimeSeries volume_evolution_residual(const Trajectory& traj);

struct CurvatureBounds {
  double K1 = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0;
  double K() const { return std::max(K1 * K1, K2 * K2); }
};

/// Empirical bounds -K1/t g <= Ric <= K2/t g, H2 <= K3/t g, |nabla H2| <= K4.
CurvatureBounds curvature_bounds(const Trajectory& traj);

/// -R + 1/4 tr_g H2, the rate of log sqrt(det g).
ScalarField volume_rate(const FlowState& s);

}  // namespace grf
