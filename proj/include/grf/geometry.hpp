#pragma once

// Discrete Riemannian calculus on periodic flat-coordinate grids.
//
// All first derivatives are 2nd-order centered differences with periodic
// wraparound. Second derivatives along one axis use the compact 3-point
// stencil; mixed second derivatives compose two centered differences.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>

#include "grf/grid.hpp"
#include "grf/parallel.hpp"

namespace grf {

// Inner products of k-forms carry a 1/k! weight. This gives
// H2_ij = 1/2 H_ikl H_j^kl and |H|^2 = 1/6 H_ijk H^ijk, so tr_g H2 = 3 |H|^2.
inline constexpr double kTwoFormWeight = 0.5;
inline constexpr double kThreeFormWeight = 1.0 / 6.0;

constexpr int levi_civita(int i, int j, int k) {
  if (i == j || j == k || i == k) return 0;
  return ((i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 0)) ? 1 : -1;
}

template <typename S>
S inner_g(const SmallMatrix<S>& ginv, const SmallMatrix<S>& a, const SmallMatrix<S>& b) {
  return (ginv * a * ginv * b).trace();
}

/// Eigenvalues of g^{-1} A for symmetric A and SPD g, ascending.
template <typename S>
SmallVector<S> relative_eigenvalues(const SmallMatrix<S>& a, const SmallMatrix<S>& g) {
  const Eigen::LLT<SmallMatrix<S>> llt(g);
  const SmallMatrix<S> linv = llt.matrixL().solve(SmallMatrix<S>::Identity(g.rows(), g.cols()));
  const SmallMatrix<S> c = linv * a * linv.transpose();
  if (c.rows() == 2) {
    const Eigen::Matrix<S, 2, 2> f = c;
    const S half_tr = S(0.5) * (f(0, 0) + f(1, 1));
    const S half_diff = S(0.5) * (f(0, 0) - f(1, 1));
    const S r = std::sqrt(half_diff * half_diff + f(0, 1) * f(0, 1));
    SmallVector<S> out(2);
    out << half_tr - r, half_tr + r;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<S, 3, 3>> es;
  es.computeDirect(Eigen::Matrix<S, 3, 3>(c), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

template <typename S>
S integrate(const BasicMetricField<S>& g, const BasicScalarField<S>& f) {
  require_same_grid(g.grid(), f.grid, "integrand");
  S total = 0;
  for (std::size_t p = 0; p < f.size(); ++p) total += f[p] * g.sqrt_det()[p];
  return total * S(g.grid().cell_volume());
}

template <typename S>
S centered_diff(const BasicScalarField<S>& f, std::size_t p, int axis) {
  const GridSpec& grid = f.grid;
  return (f[grid.neighbor(p, axis, 1)] - f[grid.neighbor(p, axis, -1)]) / S(2.0 * grid.spacing(axis));
}

template <typename S>
BasicCovectorField<S> gradient(const BasicScalarField<S>& f) {
  const GridSpec& grid = f.grid;
  BasicCovectorField<S> out(grid);
  parallel_for(grid.size(), [&](std::size_t p) {
    for (int a = 0; a < grid.dim(); ++a) out.values(static_cast<Eigen::Index>(p), a) = centered_diff(f, p, a);
  });
  return out;
}

/// Gamma^k_ij, stored as T(k, i, j); symmetric in (i, j).
template <typename S>
BasicTensor3Field<S> christoffel(const BasicMetricField<S>& g) {
  const GridSpec& grid = g.grid();
  const int n = grid.dim();
  const int nc = sym_components(n);
  const auto& gv = g.base().values;
  BasicTensor3Field<S> gamma(grid);
  parallel_for(grid.size(), [&](std::size_t p) {
    S dg[3][6];
    for (int k = 0; k < n; ++k) {
      const auto pp = static_cast<Eigen::Index>(grid.neighbor(p, k, 1));
      const auto pm = static_cast<Eigen::Index>(grid.neighbor(p, k, -1));
      const S inv2h = S(0.5 / grid.spacing(k));
      for (int c = 0; c < nc; ++c) dg[k][c] = (gv(pp, c) - gv(pm, c)) * inv2h;
    }
    auto d = [&](int k, int i, int j) { return dg[k][sym_index(n, i, j)]; };
    const SmallMatrix<S> ginv = g.inverse_at(p);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          S s = 0;
          for (int l = 0; l < n; ++l) s += ginv(k, l) * (d(i, j, l) + d(j, i, l) - d(l, i, j));
          gamma(p, k, i, j) = gamma(p, k, j, i) = S(0.5) * s;
        }
  });
  return gamma;
}

template <typename S>
struct BasicRicci {
  BasicSymTensorField<S> ric;
  BasicScalarField<S> scalar;
};
using Ricci = BasicRicci<double>;

/// R_ij = d_k G^k_ij - d_j G^k_ki + G^k_kl G^l_ij - G^k_jl G^l_ki, with the
/// d_j G^k_ki term symmetrized in (i, j).
template <typename S>
BasicRicci<S> ricci(const BasicMetricField<S>& g, const BasicTensor3Field<S>& gamma) {
  const GridSpec& grid = g.grid();
  require_same_grid(grid, gamma.grid, "christoffel symbols");
  const int n = grid.dim();
  BasicCovectorField<S> contracted(grid);
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int i = 0; i < n; ++i) {
      S s = 0;
      for (int k = 0; k < n; ++k) s += gamma(p, k, k, i);
      contracted.values(static_cast<Eigen::Index>(p), i) = s;
    }
  BasicRicci<S> out{BasicSymTensorField<S>(grid), BasicScalarField<S>(grid)};
  parallel_for(grid.size(), [&](std::size_t p) {
    std::array<std::size_t, 3> up{}, down{};
    std::array<S, 3> inv2h{};
    for (int k = 0; k < n; ++k) {
      up[k] = grid.neighbor(p, k, 1);
      down[k] = grid.neighbor(p, k, -1);
      inv2h[k] = S(0.5 / grid.spacing(k));
    }
    auto dc = [&](int axis, int comp) {
      return (contracted.values(static_cast<Eigen::Index>(up[axis]), comp) -
              contracted.values(static_cast<Eigen::Index>(down[axis]), comp)) *
             inv2h[axis];
    };
    SmallMatrix<S> r(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        S v = 0;
        for (int k = 0; k < n; ++k) v += (gamma(up[k], k, i, j) - gamma(down[k], k, i, j)) * inv2h[k];
        v -= S(0.5) * (dc(j, i) + dc(i, j));
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) v += gamma(p, k, k, l) * gamma(p, l, i, j) - gamma(p, k, j, l) * gamma(p, l, k, i);
        r(i, j) = r(j, i) = v;
      }
    out.ric.set(p, r);
    out.scalar[p] = (g.inverse_at(p) * r).trace();
  });
  return out;
}

template <typename S>
BasicRicci<S> ricci(const BasicMetricField<S>& g) {
  return ricci(g, christoffel(g));
}

/// Conservative divergence-form operator u -> d_i(A^ij d_j u).
///
/// Diagonal terms use face-averaged coefficients on the compact stencil,
/// off-diagonal terms compose centered differences. The stencil sums to zero
/// over the torus and is symmetric: sum_p w (L u) = sum_p u (L w).
template <typename S>
class BasicFluxOperator {
 public:
  BasicFluxOperator() = default;
  explicit BasicFluxOperator(BasicSymTensorField<S> coefficient) : coef_(std::move(coefficient)) {}

  const GridSpec& grid() const { return coef_.grid; }
  const BasicSymTensorField<S>& coefficient() const { return coef_; }

  BasicScalarField<S> apply(const BasicScalarField<S>& u) const {
    const GridSpec& grid = coef_.grid;
    require_same_grid(grid, u.grid, "flux operand");
    const int n = grid.dim();
    BasicScalarField<S> out(grid);
    parallel_for(grid.size(), [&](std::size_t p) {
      S sum = 0;
      for (int i = 0; i < n; ++i) {
        const std::size_t pp = grid.neighbor(p, i, 1);
        const std::size_t pm = grid.neighbor(p, i, -1);
        const S hi = S(grid.spacing(i));
        const S a_here = coef_.comp(p, i, i);
        const S a_up = S(0.5) * (a_here + coef_.comp(pp, i, i));
        const S a_down = S(0.5) * (a_here + coef_.comp(pm, i, i));
        sum += (a_up * (u[pp] - u[p]) - a_down * (u[p] - u[pm])) / (hi * hi);
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const S flux_up = coef_.comp(pp, i, j) * centered_diff(u, pp, j);
          const S flux_down = coef_.comp(pm, i, j) * centered_diff(u, pm, j);
          sum += (flux_up - flux_down) / (S(2) * hi);
        }
      }
      out[p] = sum;
    });
    return out;
  }

 private:
  BasicSymTensorField<S> coef_;
};

/// Laplace-Beltrami operator (1/sqrt g) d_i(sqrt g g^ij d_j u).
template <typename S>
class BasicLaplaceOperator {
 public:
  BasicLaplaceOperator() = default;
  explicit BasicLaplaceOperator(const BasicMetricField<S>& g) : sqrt_det_(g.sqrt_det()) {
    BasicSymTensorField<S> a(g.grid());
    a.values = g.inverse().values;
    for (std::size_t p = 0; p < g.size(); ++p) a.values.row(static_cast<Eigen::Index>(p)) *= sqrt_det_[p];
    flux_ = BasicFluxOperator<S>(std::move(a));
  }

  const GridSpec& grid() const { return flux_.grid(); }
  const BasicScalarField<S>& sqrt_det() const { return sqrt_det_; }
  const BasicFluxOperator<S>& flux() const { return flux_; }

  BasicScalarField<S> apply(const BasicScalarField<S>& u) const {
    BasicScalarField<S> out = flux_.apply(u);
    out.values.array() /= sqrt_det_.values.array();
    return out;
  }

  /// Discrete |grad u|^2 defined through the product rule:
  /// 1/2 (L(u^2) - 2 u L(u)). Consistent with g^ij d_i u d_j u to second order
  /// and exactly compatible with the operator itself.
  BasicScalarField<S> carre_du_champ(const BasicScalarField<S>& u) const {
    BasicScalarField<S> sq(u.grid, u.values.array().square().matrix());
    BasicScalarField<S> out = apply(sq);
    const BasicScalarField<S> lu = apply(u);
    out.values = S(0.5) * (out.values.array() - S(2) * u.values.array() * lu.values.array()).matrix();
    return out;
  }

 private:
  BasicScalarField<S> sqrt_det_;
  BasicFluxOperator<S> flux_;
};

using FluxOperator = BasicFluxOperator<double>;
using LaplaceOperator = BasicLaplaceOperator<double>;

template <typename S>
BasicScalarField<S> laplacian(const BasicMetricField<S>& g, const BasicScalarField<S>& u) {
  require_same_grid(g.grid(), u.grid, "laplacian operand");
  return BasicLaplaceOperator<S>(g).apply(u);
}

template <typename S>
struct BasicScalarDerivatives {
  BasicCovectorField<S> grad;
  BasicScalarField<S> grad_sq;
  BasicSymTensorField<S> hess;
  BasicScalarField<S> lap;
};
using ScalarDerivatives = BasicScalarDerivatives<double>;

template <typename S>
BasicScalarDerivatives<S> scalar_calculus(const BasicMetricField<S>& g, const BasicScalarField<S>& u,
                                          const BasicTensor3Field<S>& gamma) {
  const GridSpec& grid = g.grid();
  require_same_grid(grid, u.grid, "scalar field");
  require_same_grid(grid, gamma.grid, "christoffel symbols");
  const int n = grid.dim();
  BasicScalarDerivatives<S> out{gradient(u), BasicScalarField<S>(grid), BasicSymTensorField<S>(grid),
                                laplacian(g, u)};
  parallel_for(grid.size(), [&](std::size_t p) {
    const SmallVector<S> du = out.grad.at(p);
    out.grad_sq[p] = du.dot(g.inverse_at(p) * du);
    SmallMatrix<S> hess(n, n);
    for (int i = 0; i < n; ++i) {
      const S hi = S(grid.spacing(i));
      hess(i, i) = (u[grid.neighbor(p, i, 1)] - S(2) * u[p] + u[grid.neighbor(p, i, -1)]) / (hi * hi);
      for (int j = i + 1; j < n; ++j) {
        const S hj = S(grid.spacing(j));
        const std::size_t ip = grid.neighbor(p, i, 1), im = grid.neighbor(p, i, -1);
        const S mixed = (u[grid.neighbor(ip, j, 1)] - u[grid.neighbor(ip, j, -1)] - u[grid.neighbor(im, j, 1)] +
                         u[grid.neighbor(im, j, -1)]) /
                        (S(4) * hi * hj);
        hess(i, j) = hess(j, i) = mixed;
      }
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) hess(i, j) -= gamma(p, k, i, j) * du(k);
    out.hess.set(p, hess);
  });
  return out;
}

template <typename S>
BasicScalarDerivatives<S> scalar_calculus(const BasicMetricField<S>& g, const BasicScalarField<S>& u) {
  return scalar_calculus(g, u, christoffel(g));
}

template <typename S>
struct BasicTensorDerivatives {
  BasicTensor3Field<S> nabla;  // nabla(k, i, j) = nabla_k Q_ij
  BasicCovectorField<S> div;   // (div Q)_j = g^ik nabla_i Q_kj
  BasicScalarField<S> norm_sq;
  BasicScalarField<S> grad_trace_sq;
};
using TensorDerivatives = BasicTensorDerivatives<double>;

/// Covariant derivative of a symmetric 2-tensor and its contractions.
/// grad(tr_g Q) is taken as g^ij nabla_k Q_ij, the discrete counterpart of
/// metric compatibility, so |grad tr Q|^2 <= n |nabla Q|^2 holds pointwise.
template <typename S>
BasicTensorDerivatives<S> tensor_calculus(const BasicMetricField<S>& g, const BasicSymTensorField<S>& q,
                                          const BasicTensor3Field<S>& gamma) {
  const GridSpec& grid = g.grid();
  require_same_grid(grid, q.grid, "tensor field");
  require_same_grid(grid, gamma.grid, "christoffel symbols");
  const int n = grid.dim();
  const int nc = sym_components(n);
  BasicTensorDerivatives<S> out{BasicTensor3Field<S>(grid), BasicCovectorField<S>(grid), BasicScalarField<S>(grid),
                                BasicScalarField<S>(grid)};
  parallel_for(grid.size(), [&](std::size_t p) {
    S dq[3][6];
    for (int k = 0; k < n; ++k) {
      const auto pp = static_cast<Eigen::Index>(grid.neighbor(p, k, 1));
      const auto pm = static_cast<Eigen::Index>(grid.neighbor(p, k, -1));
      const S inv2h = S(0.5 / grid.spacing(k));
      for (int c = 0; c < nc; ++c) dq[k][c] = (q.values(pp, c) - q.values(pm, c)) * inv2h;
    }
    const SmallMatrix<S> qa = q.at(p);
    const SmallMatrix<S> ginv = g.inverse_at(p);
    S nab[3][3][3];
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          S v = dq[k][sym_index(n, i, j)];
          for (int l = 0; l < n; ++l) v -= gamma(p, l, k, i) * qa(l, j) + gamma(p, l, k, j) * qa(i, l);
          nab[k][i][j] = v;
          out.nabla(p, k, i, j) = v;
        }
    for (int j = 0; j < n; ++j) {
      S v = 0;
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) v += ginv(i, k) * nab[i][k][j];
      out.div.values(static_cast<Eigen::Index>(p), j) = v;
    }
    // Raise the three indices one at a time.
    S up1[3][3][3], up2[3][3][3];
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          S v = 0;
          for (int k = 0; k < n; ++k) v += ginv(a, k) * nab[k][i][j];
          up1[a][i][j] = v;
        }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int j = 0; j < n; ++j) {
          S v = 0;
          for (int i = 0; i < n; ++i) v += ginv(b, i) * up1[a][i][j];
          up2[a][b][j] = v;
        }
    S norm = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          S v = 0;
          for (int j = 0; j < n; ++j) v += ginv(c, j) * up2[a][b][j];
          norm += v * nab[a][b][c];
        }
    out.norm_sq[p] = norm;
    SmallVector<S> dtr(n);
    for (int k = 0; k < n; ++k) {
      S v = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v += ginv(i, j) * nab[k][i][j];
      dtr(k) = v;
    }
    out.grad_trace_sq[p] = dtr.dot(ginv * dtr);
  });
  return out;
}

template <typename S>
BasicTensorDerivatives<S> tensor_calculus(const BasicMetricField<S>& g, const BasicSymTensorField<S>& q) {
  return tensor_calculus(g, q, christoffel(g));
}

template <typename S>
struct BasicTracefreeSplit {
  BasicSymTensorField<S> trace_part;
  BasicSymTensorField<S> tracefree;
};
using TracefreeSplit = BasicTracefreeSplit<double>;

/// Q = (tr_g Q / n) g + V with tr_g V = 0.
template <typename S>
BasicTracefreeSplit<S> tracefree_decompose(const BasicMetricField<S>& g, const BasicSymTensorField<S>& q) {
  const GridSpec& grid = g.grid();
  require_same_grid(grid, q.grid, "tensor field");
  const int n = grid.dim();
  BasicTracefreeSplit<S> out{BasicSymTensorField<S>(grid), BasicSymTensorField<S>(grid)};
  parallel_for(grid.size(), [&](std::size_t p) {
    const SmallMatrix<S> qa = q.at(p);
    const SmallMatrix<S> ga = g.at(p);
    const S tr = (g.inverse_at(p) * qa).trace();
    const SmallMatrix<S> trace_part = (tr / S(n)) * ga;
    out.trace_part.set(p, trace_part);
    out.tracefree.set(p, qa - trace_part);
  });
  return out;
}

/// Pointwise g-trace of a symmetric tensor.
template <typename S>
BasicScalarField<S> trace_g(const BasicMetricField<S>& g, const BasicSymTensorField<S>& q) {
  require_same_grid(g.grid(), q.grid, "tensor field");
  BasicScalarField<S> out(g.grid());
  for (std::size_t p = 0; p < g.size(); ++p) out[p] = (g.inverse_at(p) * q.at(p)).trace();
  return out;
}

template <typename S>
struct BasicHFormTerms {
  BasicSymTensorField<S> h_sq;        // H2_ij
  BasicScalarField<S> norm_h_sq;      // |H|^2 in the form norm
  BasicThreeFormField<S> dd_star;     // d d* H
};
using HFormTerms = BasicHFormTerms<double>;

/// H2, |H|^2 and d d*_g H for H = phi dx^1^dx^2^dx^3.
///
/// With *H = phi / sqrt g and d* = -*d* on 3-forms in 3 dimensions,
/// d d* H = -d_i(sqrt g g^ij d_j(phi / sqrt g)) dx^1^dx^2^dx^3, so that
/// dH/dt = -d d* H is a heat flow for the coefficient.
template <typename S>
BasicHFormTerms<S> hform_ops(const BasicMetricField<S>& g, const BasicThreeFormField<S>& h) {
  const GridSpec& grid = g.grid();
  if (grid.dim() != 3) throw ShapeError("three-form operators are only defined in dimension 3");
  require_same_grid(grid, h.grid(), "three-form");
  constexpr int n = 3;
  BasicHFormTerms<S> out{BasicSymTensorField<S>(grid), BasicScalarField<S>(grid),
                         BasicThreeFormField<S>(BasicScalarField<S>(grid))};
  parallel_for(grid.size(), [&](std::size_t p) {
    const S phi = h.coefficient[p];
    const SmallMatrix<S> ginv = g.inverse_at(p);
    // Only the six nonzero components H_ikl = phi eps_ikl enter the sums.
    constexpr int perm[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}};
    constexpr int sign[6] = {1, 1, 1, -1, -1, -1};
    SmallMatrix<S> h2 = SmallMatrix<S>::Zero(n, n);
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        const int i = perm[a][0], k = perm[a][1], l = perm[a][2];
        const int j = perm[b][0], m = perm[b][1], q = perm[b][2];
        h2(i, j) += S(sign[a] * sign[b]) * phi * phi * ginv(k, m) * ginv(l, q);
      }
    h2 *= S(kTwoFormWeight);
    out.h_sq.set(p, h2);
    S norm = 0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        norm += S(sign[a] * sign[b]) * phi * phi * ginv(perm[a][0], perm[b][0]) * ginv(perm[a][1], perm[b][1]) *
                ginv(perm[a][2], perm[b][2]);
    out.norm_h_sq[p] = S(kThreeFormWeight) * norm;
  });
  BasicScalarField<S> dual(grid, (h.coefficient.values.array() / g.sqrt_det().values.array()).matrix());
  const BasicLaplaceOperator<S> lap(g);
  out.dd_star.coefficient = lap.flux().apply(dual);
  out.dd_star.coefficient.values *= S(-1);
  return out;
}

}  // namespace grf
