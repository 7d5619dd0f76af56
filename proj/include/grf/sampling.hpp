#pragma once

// Off-grid evaluation of grid fields by periodic tensor-product Catmull-Rom
// interpolation, exact on the nodes and for linear data.

#include <array>
#include <cmath>
#include <vector>

#include "grf/grid.hpp"

namespace grf {

using Point = std::array<double, 3>;

struct PointStencil {
  std::vector<std::size_t> nodes;
  std::vector<double> weight;
  std::array<std::vector<double>, 3> dweight;  // d weight / d x_a
};

inline PointStencil point_stencil(const GridSpec& grid, const Point& x) {
  const int n = grid.dim();
  std::array<int, 3> base{0, 0, 0};
  std::array<std::array<double, 4>, 3> w{}, dw{};
  for (int a = 0; a < 3; ++a) {
    if (a >= n) {
      w[a] = {1.0, 0.0, 0.0, 0.0};
      dw[a] = {0.0, 0.0, 0.0, 0.0};
      continue;
    }
    const double u = x[a] / grid.spacing(a);
    const double i0 = std::floor(u);
    const double f = u - i0;
    base[a] = static_cast<int>(i0) - 1;
    const double f2 = f * f, f3 = f2 * f, inv_h = 1.0 / grid.spacing(a);
    w[a] = {0.5 * (-f3 + 2 * f2 - f), 0.5 * (3 * f3 - 5 * f2 + 2), 0.5 * (-3 * f3 + 4 * f2 + f), 0.5 * (f3 - f2)};
    dw[a] = {0.5 * (-3 * f2 + 4 * f - 1) * inv_h, 0.5 * (9 * f2 - 10 * f) * inv_h,
             0.5 * (-9 * f2 + 8 * f + 1) * inv_h, 0.5 * (3 * f2 - 2 * f) * inv_h};
  }
  const int span1 = n > 1 ? 4 : 1, span2 = n > 2 ? 4 : 1;
  PointStencil st;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < span1; ++j)
      for (int k = 0; k < span2; ++k) {
        st.nodes.push_back(grid.index(base[0] + i, base[1] + j, base[2] + k));
        st.weight.push_back(w[0][i] * w[1][j] * w[2][k]);
        st.dweight[0].push_back(dw[0][i] * w[1][j] * w[2][k]);
        st.dweight[1].push_back(w[0][i] * dw[1][j] * w[2][k]);
        st.dweight[2].push_back(w[0][i] * w[1][j] * dw[2][k]);
      }
  return st;
}

inline double sample(const ScalarField& f, const PointStencil& st) {
  double v = 0.0;
  for (std::size_t q = 0; q < st.nodes.size(); ++q) v += st.weight[q] * f[st.nodes[q]];
  return v;
}

inline double sample(const ScalarField& f, const Point& x) { return sample(f, point_stencil(f.grid, x)); }

/// Metric components at st; with `grad`, also d g / d x_a for each axis.
inline SmallMatrix<double> sample_metric(const MetricField& g, const PointStencil& st,
                                         std::array<SmallMatrix<double>, 3>* grad = nullptr) {
  const int n = g.dim();
  SmallMatrix<double> m = SmallMatrix<double>::Zero(n, n);
  if (grad)
    for (auto& d : *grad) d = SmallMatrix<double>::Zero(n, n);
  for (std::size_t q = 0; q < st.nodes.size(); ++q) {
    const SmallMatrix<double> node = g.at(st.nodes[q]);
    m += st.weight[q] * node;
    if (grad)
      for (int a = 0; a < n; ++a) (*grad)[a] += st.dweight[a][q] * node;
  }
  return m;
}

}  // namespace grf
