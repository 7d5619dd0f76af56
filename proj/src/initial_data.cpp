#include "grf/initial_data.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace grf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int clamp_axes(const GridSpec& grid, int varying_axes) {
  if (varying_axes < 1 || varying_axes > grid.dim())
    throw ParameterError("varying_axes must lie between 1 and the grid dimension");
  return varying_axes;
}

double phase(const GridSpec& grid, const std::array<double, 3>& x, int axis, int m) {
  return kTwoPi * m * x[axis] / grid.side(axis);
}

// Band-limited periodic function built from seeded Fourier modes.
class SmoothNoise {
 public:
  SmoothNoise(std::mt19937_64& rng, int axes, int kmax) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    for (int a = -kmax; a <= kmax; ++a)
      for (int b = (axes > 1 ? -kmax : 0); b <= (axes > 1 ? kmax : 0); ++b)
        for (int c = (axes > 2 ? -kmax : 0); c <= (axes > 2 ? kmax : 0); ++c) {
          if (a == 0 && b == 0 && c == 0) continue;
          const double amp = unit(rng) / (a * a + b * b + c * c);
          modes_.push_back({{a, b, c}, amp, angle(rng)});
        }
  }
  double operator()(const GridSpec& grid, const std::array<double, 3>& x) const {
    double v = 0.0;
    for (const Mode& m : modes_) {
      double arg = m.phase;
      for (int a = 0; a < grid.dim(); ++a) arg += phase(grid, x, a, m.k[a]);
      v += m.amp * std::sin(arg);
    }
    return v;
  }

 private:
  struct Mode {
    std::array<int, 3> k;
    double amp;
    double phase;
  };
  std::vector<Mode> modes_;
};

}  // namespace

MetricField make_metric(const GridSpec& grid, const MetricFamily& f, int varying_axes) {
  const int axes = clamp_axes(grid, varying_axes);
  const int n = grid.dim();
  SymTensorField s(grid);
  switch (f.kind) {
    case MetricKind::flat:
      return MetricField::flat(grid);
    case MetricKind::conformal_bump:
      for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto x = grid.position(p);
        double phi = f.amplitude;
        for (int a = 0; a < axes; ++a) phi *= std::cos(phase(grid, x, a, f.frequency));
        for (int i = 0; i < n; ++i) s.comp(p, i, i) = std::exp(2.0 * phi);
      }
      return MetricField(std::move(s));
    case MetricKind::random_smooth: {
      if (!(f.amplitude >= 0.0) || f.amplitude * n >= 1.0)
        throw ParameterError("random_smooth amplitude must satisfy 0 <= amplitude < 1/dim");
      std::mt19937_64 rng(f.seed);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const SmoothNoise noise(rng, axes, f.modes);
          for (std::size_t p = 0; p < grid.size(); ++p) s.comp(p, i, j) = noise(grid, grid.position(p));
        }
      const double peak = s.values.cwiseAbs().maxCoeff();
      if (peak > 0.0) s.values *= f.amplitude / peak;
      for (std::size_t p = 0; p < grid.size(); ++p)
        for (int i = 0; i < n; ++i) s.comp(p, i, i) += 1.0;
      return MetricField(std::move(s));
    }
  }
  throw ParameterError("unknown metric family");
}

std::optional<ThreeFormField> make_form(const GridSpec& grid, const FormFamily& f) {
  if (f.kind == FormKind::none) return std::nullopt;
  if (grid.dim() != 3) throw ShapeError("a three-form needs a 3-dimensional grid");
  if (f.axis < 0 || f.axis >= 3) throw ParameterError("three-form mode axis out of range");
  const double eps = f.kind == FormKind::single_mode ? f.epsilon : 0.0;
  ScalarField phi(grid);
  for (std::size_t p = 0; p < grid.size(); ++p)
    phi[p] = f.k * (1.0 + eps * std::sin(phase(grid, grid.position(p), f.axis, f.mode)));
  return ThreeFormField(std::move(phi));
}

ScalarField make_scalar(const GridSpec& grid, const ScalarFamily& f) {
  if (!(f.c > 0.0)) throw ParameterError("scalar family level c must be positive");
  if (f.axis < 0 || f.axis >= grid.dim()) throw ParameterError("scalar mode axis out of range");
  const double eps = f.kind == ScalarKind::single_mode ? f.epsilon : 0.0;
  if (std::abs(eps) >= 1.0) throw ParameterError("single-mode epsilon must satisfy |epsilon| < 1 for positivity");
  ScalarField u(grid);
  for (std::size_t p = 0; p < grid.size(); ++p)
    u[p] = f.c * (1.0 + eps * std::sin(phase(grid, grid.position(p), f.axis, f.mode)));
  return u;
}

ScalarField make_terminal_profile(const GridSpec& grid, const TerminalFamily& f, int varying_axes) {
  const int axes = clamp_axes(grid, varying_axes);
  ScalarField k(grid);
  if (f.kind == TerminalKind::constant) {
    k.values.setOnes();
    return k;
  }
  const double w = f.width ? *f.width : f.width_cells * grid.max_spacing();
  if (!(w > 0.0)) throw ParameterError("terminal width must be positive");
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto x = grid.position(p);
    double v = 1.0;
    for (int a = 0; a < axes; ++a) {
      const double L = grid.side(a);
      const double d = x[a] - 0.5 * L;
      // Sum over periodic images keeps the profile smooth across the seam.
      double s = 0.0;
      for (int j = -3; j <= 3; ++j) s += std::exp(-(d + j * L) * (d + j * L) / (2.0 * w * w));
      v *= s;
    }
    k[p] = v;
  }
  return k;
}

MetricKind parse_metric_kind(const std::string& s) {
  if (s == "flat") return MetricKind::flat;
  if (s == "conformal-bump") return MetricKind::conformal_bump;
  if (s == "random-smooth") return MetricKind::random_smooth;
  throw ParameterError("unknown metric family '" + s + "'");
}

FormKind parse_form_kind(const std::string& s) {
  if (s == "none") return FormKind::none;
  if (s == "constant") return FormKind::constant;
  if (s == "single-mode") return FormKind::single_mode;
  throw ParameterError("unknown three-form family '" + s + "'");
}

ScalarKind parse_scalar_kind(const std::string& s) {
  if (s == "constant") return ScalarKind::constant;
  if (s == "single-mode") return ScalarKind::single_mode;
  throw ParameterError("unknown scalar family '" + s + "'");
}

TerminalKind parse_terminal_kind(const std::string& s) {
  if (s == "gaussian") return TerminalKind::gaussian;
  if (s == "constant") return TerminalKind::constant;
  throw ParameterError("unknown terminal family '" + s + "'");
}

}  // namespace grf
