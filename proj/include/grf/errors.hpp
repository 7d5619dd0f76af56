#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grf {

/// Configuration or parameter constraint violated (bad alpha, bad window, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fields defined on different grids, or wrong dimension for an operator.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of the numerics themselves; the CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric is not positive definite at some grid point.
class DomainError : public NumericalError {
 public:
  DomainError(const std::string& what, std::size_t point, double min_eigenvalue)
      : NumericalError(what), point_(point), min_eigenvalue_(min_eigenvalue) {}
  std::size_t point() const { return point_; }
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  std::size_t point_;
  double min_eigenvalue_;
};

/// Metric degenerated during time stepping.
class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& what, double time, std::size_t point)
      : NumericalError(what), time_(time), point_(point) {}
  double time() const { return time_; }
  std::size_t point() const { return point_; }

 private:
  double time_;
  std::size_t point_;
};

/// A scalar evolution lost positivity (time step too large for the data).
class InstabilityError : public NumericalError {
 public:
  InstabilityError(const std::string& what, double time) : NumericalError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Iterative solver failed to converge.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double residual) : NumericalError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Requested time window not covered by the data.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace grf
