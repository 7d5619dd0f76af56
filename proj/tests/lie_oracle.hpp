#pragma once

// Brute-force Ricci tensor of a left-invariant metric from the structure
// constants of an orthonormal frame, via Koszul's formula. Independent of the
// closed-form Milnor expressions in the library.

#include <array>
#include <cmath>

namespace grf::testing {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Cube = std::array<Mat3, 3>;

inline int levi_civita(int i, int j, int k) {
  if (i == j || j == k || i == k) return 0;
  return ((i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 0)) ? 1 : -1;
}

/// [f_i, f_j] = C[i][j][k] f_k for f_i = e_i / sqrt(g_i), [e_i, e_j] = lambda_k eps_ijk e_k.
inline Cube orthonormal_structure(const std::array<double, 3>& g, const std::array<double, 3>& lambda) {
  Cube c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        c[i][j][k] = lambda[k] * levi_civita(i, j, k) * std::sqrt(g[k] / (g[i] * g[j]));
  return c;
}

/// Ric(f_j, f_l) = sum_i <R(f_i, f_j) f_l, f_i>, R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y].
inline Mat3 koszul_ricci(const Cube& c) {
  // Gamma[i][j][k] = <nabla_{f_i} f_j, f_k>
  Cube gam{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) gam[i][j][k] = 0.5 * (c[i][j][k] - c[j][k][i] + c[k][i][j]);
  Mat3 ric{};
  for (int j = 0; j < 3; ++j)
    for (int l = 0; l < 3; ++l) {
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) {
        // component n = i of R(f_i, f_j) f_l
        double r = 0.0;
        for (int m = 0; m < 3; ++m) {
          r += gam[j][l][m] * gam[i][m][i] - gam[i][l][m] * gam[j][m][i];
          r -= c[i][j][m] * gam[m][l][i];
        }
        sum += r;
      }
      ric[j][l] = sum;
    }
  return ric;
}

/// Ric(e_i, e_j) in the coframe of the Milnor basis.
inline Mat3 coframe_ricci(const std::array<double, 3>& g, const std::array<double, 3>& lambda) {
  const Mat3 r = koszul_ricci(orthonormal_structure(g, lambda));
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i][j] = std::sqrt(g[i] * g[j]) * r[i][j];
  return out;
}

/// H2_ij = 1/2 H_ikl H_j^kl for H = k e1^e2^e3, by direct index summation.
inline Mat3 brute_h_sq(const std::array<double, 3>& g, double k) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) s += k * levi_civita(i, p, q) * k * levi_civita(j, p, q) / (g[p] * g[q]);
      out[i][j] = 0.5 * s;
    }
  return out;
}

}  // namespace grf::testing
