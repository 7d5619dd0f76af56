#include "grf/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "grf/errors.hpp"

namespace grf {

double TimeSeries::sup() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}

DerivativeStencil time_derivative_stencil(const std::vector<double>& times, std::size_t k) {
  const std::size_t n = times.size();
  if (n < 3) throw ShapeError("time derivatives need at least 3 samples");
  if (k >= n) throw RangeError("time index out of range");
  std::size_t i0 = k == 0 ? 0 : (k == n - 1 ? n - 3 : k - 1);
  const double x0 = times[i0], x1 = times[i0 + 1], x2 = times[i0 + 2], x = times[k];
  // Derivatives of the Lagrange basis through (x0, x1, x2) at x.
  DerivativeStencil s;
  s.index = {i0, i0 + 1, i0 + 2};
  s.weight = {((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2)), ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2)),
              ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))};
  return s;
}

double simpson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("simpson: abscissa and ordinate sizes differ");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
  const std::size_t intervals = n - 1;
  const std::size_t paired = intervals - intervals % 2;
  double total = 0.0;
  for (std::size_t i = 0; i + 2 <= paired; i += 2) {
    const double h0 = x[i + 1] - x[i], h1 = x[i + 2] - x[i + 1];
    total += (h0 + h1) / 6.0 *
             ((2.0 - h1 / h0) * y[i] + (h0 + h1) * (h0 + h1) / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
  }
  if (intervals % 2 == 1) {
    const double h = x[n - 1] - x[n - 2], hp = x[n - 2] - x[n - 3];
    total += (2.0 * h * h + 3.0 * h * hp) / (6.0 * (hp + h)) * y[n - 1] +
             (h * h + 3.0 * h * hp) / (6.0 * hp) * y[n - 2] - h * h * h / (6.0 * hp * (hp + h)) * y[n - 3];
  }
  return total;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("slope needs at least two matching samples");
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace grf
