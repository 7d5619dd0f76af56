#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "grf/errors.hpp"

namespace grf {

template <typename Scalar>
using SmallMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
template <typename Scalar>
using SmallVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1>;

/// Periodic tensor-product grid over a flat-coordinate 2- or 3-torus.
/// Points are ordered row-major: the last axis varies fastest.
class GridSpec {
 public:
  static constexpr int kMinPoints = 8;

  GridSpec() = default;
  GridSpec(int dim, std::array<int, 3> points, std::array<double, 3> side)
      : dim_(dim), points_(points), side_(side) {
    if (dim != 2 && dim != 3) throw ShapeError("grid dimension must be 2 or 3");
    for (int a = 0; a < 3; ++a) {
      if (a >= dim) {
        points_[a] = 1;
        side_[a] = 1.0;
        continue;
      }
      if (points_[a] < kMinPoints)
        throw ShapeError("grid axis " + std::to_string(a) + " needs at least 8 points");
      if (!(side_[a] > 0.0) || !std::isfinite(side_[a]))
        throw ShapeError("grid axis " + std::to_string(a) + " needs a positive side length");
    }
    strides_ = {static_cast<std::size_t>(points_[1]) * points_[2],
                static_cast<std::size_t>(points_[2]), 1};
    size_ = static_cast<std::size_t>(points_[0]) * points_[1] * points_[2];
  }

  /// Cubic/square grid with n points and side length L on every axis.
  static GridSpec uniform(int dim, int n, double side = 1.0) {
    return GridSpec(dim, {n, n, dim == 3 ? n : 1}, {side, side, side});
  }

  int dim() const { return dim_; }
  std::size_t size() const { return size_; }
  int points(int axis) const { return points_[axis]; }
  double side(int axis) const { return side_[axis]; }
  const std::array<int, 3>& points() const { return points_; }
  const std::array<double, 3>& sides() const { return side_; }
  double spacing(int axis) const { return side_[axis] / points_[axis]; }
  double max_spacing() const {
    double h = 0.0;
    for (int a = 0; a < dim_; ++a) h = std::max(h, spacing(a));
    return h;
  }
  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim_; ++a) h = std::min(h, spacing(a));
    return h;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= spacing(a);
    return v;
  }
  double total_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= side_[a];
    return v;
  }

  int coord(std::size_t p, int axis) const {
    return static_cast<int>((p / strides_[axis]) % static_cast<std::size_t>(points_[axis]));
  }
  std::array<int, 3> coords(std::size_t p) const { return {coord(p, 0), coord(p, 1), coord(p, 2)}; }
  std::size_t index(int i, int j, int k = 0) const {
    auto wrap = [](int c, int n) { return static_cast<std::size_t>(((c % n) + n) % n); };
    return wrap(i, points_[0]) * strides_[0] + wrap(j, points_[1]) * strides_[1] +
           wrap(k, points_[2]) * strides_[2];
  }
  /// Periodic neighbour of p displaced by `offset` cells along `axis`.
  std::size_t neighbor(std::size_t p, int axis, int offset) const {
    const int n = points_[axis];
    const int c = coord(p, axis);
    const int shifted = ((c + offset) % n + n) % n;
    return p + static_cast<std::size_t>(shifted) * strides_[axis] - static_cast<std::size_t>(c) * strides_[axis];
  }
  std::array<double, 3> position(std::size_t p) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) x[a] = coord(p, a) * spacing(a);
    return x;
  }

  bool operator==(const GridSpec& o) const {
    return dim_ == o.dim_ && points_ == o.points_ && side_ == o.side_;
  }

 private:
  int dim_ = 0;
  std::array<int, 3> points_{1, 1, 1};
  std::array<double, 3> side_{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> strides_{1, 1, 1};
  std::size_t size_ = 0;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string("grid mismatch: ") + what);
}

/// Number of stored components of a symmetric dim x dim tensor.
constexpr int sym_components(int dim) { return dim * (dim + 1) / 2; }
/// Storage slot of entry (i, j) of a symmetric tensor (upper triangle, row-major).
constexpr int sym_index(int dim, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * dim - i * (i - 1) / 2 + (j - i);
}

template <typename Scalar>
struct BasicScalarField {
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  GridSpec grid;
  Values values;

  BasicScalarField() = default;
  explicit BasicScalarField(const GridSpec& g) : grid(g), values(Values::Zero(static_cast<Eigen::Index>(g.size()))) {}
  BasicScalarField(const GridSpec& g, Values v) : grid(g), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != grid.size()) throw ShapeError("scalar field size mismatch");
  }

  Scalar& operator[](std::size_t p) { return values[static_cast<Eigen::Index>(p)]; }
  const Scalar& operator[](std::size_t p) const { return values[static_cast<Eigen::Index>(p)]; }
  std::size_t size() const { return grid.size(); }
  bool all_finite() const { return values.allFinite(); }
};

/// Symmetric 2-tensor field; only the upper triangle is stored so symmetry is exact.
template <typename Scalar>
struct BasicSymTensorField {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GridSpec grid;
  Storage values;  // size() x sym_components(dim)

  BasicSymTensorField() = default;
  explicit BasicSymTensorField(const GridSpec& g)
      : grid(g), values(Storage::Zero(static_cast<Eigen::Index>(g.size()), sym_components(g.dim()))) {}

  int dim() const { return grid.dim(); }
  std::size_t size() const { return grid.size(); }

  SmallMatrix<Scalar> at(std::size_t p) const {
    const int n = dim();
    SmallMatrix<Scalar> m(n, n);
    const auto row = static_cast<Eigen::Index>(p);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) m(i, j) = m(j, i) = values(row, sym_index(n, i, j));
    return m;
  }
  /// Stores the symmetric part of m.
  template <class Derived>
  void set(std::size_t p, const Eigen::MatrixBase<Derived>& m) {
    const int n = dim();
    const auto row = static_cast<Eigen::Index>(p);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) values(row, sym_index(n, i, j)) = Scalar(0.5) * (m(i, j) + m(j, i));
  }
  Scalar& comp(std::size_t p, int i, int j) { return values(static_cast<Eigen::Index>(p), sym_index(dim(), i, j)); }
  Scalar comp(std::size_t p, int i, int j) const {
    return values(static_cast<Eigen::Index>(p), sym_index(dim(), i, j));
  }
  bool all_finite() const { return values.allFinite(); }
};

/// Covector field (one value per axis and point).
template <typename Scalar>
struct BasicCovectorField {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GridSpec grid;
  Storage values;  // size() x dim

  BasicCovectorField() = default;
  explicit BasicCovectorField(const GridSpec& g)
      : grid(g), values(Storage::Zero(static_cast<Eigen::Index>(g.size()), g.dim())) {}

  SmallVector<Scalar> at(std::size_t p) const { return values.row(static_cast<Eigen::Index>(p)).transpose(); }
};

/// Covariant 3-tensor field T(a, b, c). Holds nabla_a Q_bc as well as Gamma^a_bc.
template <typename Scalar>
struct BasicTensor3Field {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GridSpec grid;
  Storage values;  // size() x dim^3

  BasicTensor3Field() = default;
  explicit BasicTensor3Field(const GridSpec& g)
      : grid(g), values(Storage::Zero(static_cast<Eigen::Index>(g.size()), g.dim() * g.dim() * g.dim())) {}

  int dim() const { return grid.dim(); }
  Scalar& operator()(std::size_t p, int a, int b, int c) {
    const int n = dim();
    return values(static_cast<Eigen::Index>(p), (a * n + b) * n + c);
  }
  Scalar operator()(std::size_t p, int a, int b, int c) const {
    const int n = dim();
    return values(static_cast<Eigen::Index>(p), (a * n + b) * n + c);
  }
  bool all_finite() const { return values.allFinite(); }
};

/// Smallest eigenvalue, determinant and inverse of a symmetric 2x2 or 3x3
/// matrix, by closed-form fixed-size routines.
template <typename Scalar>
struct SpdFactors {
  Scalar min_eigenvalue;
  Scalar determinant;
  SmallMatrix<Scalar> inverse;
};

template <typename Scalar>
SpdFactors<Scalar> spd_factors(const SmallMatrix<Scalar>& m) {
  if (m.rows() == 2) {
    const Eigen::Matrix<Scalar, 2, 2> f = m;
    const Scalar half_tr = Scalar(0.5) * (f(0, 0) + f(1, 1));
    const Scalar half_diff = Scalar(0.5) * (f(0, 0) - f(1, 1));
    const Scalar lo = half_tr - std::sqrt(half_diff * half_diff + f(0, 1) * f(0, 1));
    return {lo, f.determinant(), SmallMatrix<Scalar>(f.inverse())};
  }
  const Eigen::Matrix<Scalar, 3, 3> f = m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 3, 3>> es;
  es.computeDirect(f, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), f.determinant(), SmallMatrix<Scalar>(f.inverse())};
}

/// Positive-definite metric; inverse and sqrt(det g) are computed once at construction.
template <typename Scalar>
class BasicMetricField {
 public:
  /// Smallest admissible eigenvalue; anything below aborts instead of regularizing.
  static constexpr double kDegenerateEigenvalue = 1e-10;

  BasicMetricField() = default;
  explicit BasicMetricField(BasicSymTensorField<Scalar> base) : base_(std::move(base)) {
    const GridSpec& g = base_.grid;
    inverse_ = BasicSymTensorField<Scalar>(g);
    sqrt_det_ = BasicScalarField<Scalar>(g);
    min_eig_ = BasicScalarField<Scalar>(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const SmallMatrix<Scalar> m = base_.at(p);
      const SpdFactors<Scalar> f = spd_factors(m);
      if (!(f.min_eigenvalue > Scalar(kDegenerateEigenvalue)) || !m.allFinite()) {
        throw DomainError("metric not positive definite at grid point " + std::to_string(p) +
                              " (smallest eigenvalue " + std::to_string(static_cast<double>(f.min_eigenvalue)) + ")",
                          p, static_cast<double>(f.min_eigenvalue));
      }
      min_eig_[p] = f.min_eigenvalue;
      sqrt_det_[p] = std::sqrt(f.determinant);
      inverse_.set(p, f.inverse);
    }
  }

  static BasicMetricField flat(const GridSpec& g) {
    BasicSymTensorField<Scalar> s(g);
    for (std::size_t p = 0; p < g.size(); ++p) s.set(p, SmallMatrix<Scalar>::Identity(g.dim(), g.dim()));
    return BasicMetricField(std::move(s));
  }

  const GridSpec& grid() const { return base_.grid; }
  int dim() const { return base_.grid.dim(); }
  std::size_t size() const { return base_.grid.size(); }
  const BasicSymTensorField<Scalar>& base() const { return base_; }
  const BasicSymTensorField<Scalar>& inverse() const { return inverse_; }
  const BasicScalarField<Scalar>& sqrt_det() const { return sqrt_det_; }
  const BasicScalarField<Scalar>& min_eigenvalue() const { return min_eig_; }
  SmallMatrix<Scalar> at(std::size_t p) const { return base_.at(p); }
  SmallMatrix<Scalar> inverse_at(std::size_t p) const { return inverse_.at(p); }

 private:
  BasicSymTensorField<Scalar> base_;
  BasicSymTensorField<Scalar> inverse_;
  BasicScalarField<Scalar> sqrt_det_;
  BasicScalarField<Scalar> min_eig_;
};

/// Top-degree form H = phi dx^1 ^ dx^2 ^ dx^3 on a 3-torus; closed automatically.
template <typename Scalar>
struct BasicThreeFormField {
  BasicScalarField<Scalar> coefficient;

  BasicThreeFormField() = default;
  explicit BasicThreeFormField(BasicScalarField<Scalar> phi) : coefficient(std::move(phi)) {
    if (coefficient.grid.dim() != 3) throw ShapeError("three-forms require a 3-dimensional grid");
  }
  const GridSpec& grid() const { return coefficient.grid; }
};

using ScalarField = BasicScalarField<double>;
using SymTensorField = BasicSymTensorField<double>;
using CovectorField = BasicCovectorField<double>;
using Tensor3Field = BasicTensor3Field<double>;
using MetricField = BasicMetricField<double>;
using ThreeFormField = BasicThreeFormField<double>;

/// Fills a scalar field from f(x, y, z) evaluated at grid positions.
template <class F>
ScalarField sample(const GridSpec& g, F&& f) {
  ScalarField out(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto x = g.position(p);
    out[p] = f(x[0], x[1], x[2]);
  }
  return out;
}

}  // namespace grf
