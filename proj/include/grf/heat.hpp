#pragma once

#include <memory>
#include <vector>

#include "grf/flow.hpp"
#include "grf/json_io.hpp"

namespace grf {

enum class Direction { forward, backward };

/// Positive scalar fields on the snapshots of a trajectory. A backward
/// evolution ends at its terminal time and covers the snapshots up to it.
class ScalarEvolution {
 public:
  ScalarEvolution(std::shared_ptr<const Trajectory> traj, std::vector<ScalarField> values, Direction dir);

  const Trajectory& trajectory() const { return *traj_; }
  const std::shared_ptr<const Trajectory>& trajectory_ptr() const { return traj_; }
  Direction direction() const { return dir_; }
  std::size_t size() const { return values_.size(); }
  const ScalarField& operator[](std::size_t k) const { return values_[k]; }
  const std::vector<ScalarField>& values() const { return values_; }
  double time(std::size_t k) const { return traj_->times()[k]; }
  std::vector<double> times() const;
  const MetricField& metric(std::size_t k) const { return (*traj_)[k].g; }

 private:
  std::shared_ptr<const Trajectory> traj_;
  std::vector<ScalarField> values_;
  Direction dir_;
};

/// d_t u = Lap_{g(t)} u from u0 at t = 0 to the horizon, RK4 on the trajectory's
/// internal clock with the metric interpolated between snapshots.
/// Throws InstabilityError if u loses positivity.
ScalarEvolution solve_heat(std::shared_ptr<const Trajectory> traj, const ScalarField& u0);

struct ConjugateSolution {
  ScalarEvolution kernel;     // snapshots 0 .. terminal_index
  ScalarEvolution potential;  // f = -ln K - n/2 ln(4 pi (T' - t)), snapshots 0 .. terminal_index - 1
  std::size_t terminal_index;
  double terminal_time;
};

/// d_t K = -Lap K + R K - 1/4 tr_g H2 K, integrated backward from K(T') =
/// terminal / mass(terminal). T' must be a snapshot time in (0, horizon).
ConjugateSolution solve_conjugate(std::shared_ptr<const Trajectory> traj, const ScalarField& terminal,
                                  double terminal_time);

/// Normalizes a positive profile to unit mass against g.
ScalarField normalize_mass(const MetricField& g, const ScalarField& profile);

/// d mu = K dV_g, stored as the density K sqrt(det g) with respect to the
/// coordinate cell volume.
struct WeightedMeasure {
  std::shared_ptr<const Trajectory> traj;
  std::vector<ScalarField> density;
  std::vector<double> mass;

  std::size_t size() const { return density.size(); }
  double max_mass_drift() const;
  /// Integral of f against d mu at snapshot k.
  double integrate(std::size_t k, const ScalarField& f) const;
};

/// Renormalized once, at the terminal snapshot; later drift is reported in `mass`.
WeightedMeasure weighted_measure(const ScalarEvolution& kernel);

/// Sup-norm residual of d_t(K sqrt g) = -(Lap K) sqrt g per snapshot, relative to
/// the sup of the density so that it does not scale with the total volume.
TimeSeries measure_evolution_residual(const WeightedMeasure& mu, const ScalarEvolution& kernel);

/// Per snapshot: d/dt of the pairing integral of u K dV_g, by three-point differences.
TimeSeries duality_residual(const ScalarEvolution& u, const ScalarEvolution& kernel);

Json evolution_to_json(const ScalarEvolution& e);

}  // namespace grf
