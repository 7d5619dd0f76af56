#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace grf {

struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;

  double sup() const;
  std::size_t size() const { return times.size(); }
};

/// Three-point second-order derivative weights at sample k of a (possibly
/// non-uniform) strictly increasing time grid. Centered in the interior,
/// one-sided at the two ends.
struct DerivativeStencil {
  std::array<std::size_t, 3> index;
  std::array<double, 3> weight;
};

DerivativeStencil time_derivative_stencil(const std::vector<double>& times, std::size_t k);

/// Composite Simpson rule on a sampled, possibly non-uniform grid. An odd
/// interval count is closed with the three-point rule for the last interval,
/// so the result stays fourth order.
double simpson(const std::vector<double>& x, const std::vector<double>& y);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace grf
