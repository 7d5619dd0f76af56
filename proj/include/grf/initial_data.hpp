#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "grf/grid.hpp"

namespace grf {

// Initial-data families. Every profile depends only on the first
// `varying_axes` coordinates, which lets a thin 3-D slab carry data that is
// constant along the last axis.

enum class MetricKind { flat, conformal_bump, random_smooth };
enum class FormKind { none, constant, single_mode };
enum class ScalarKind { constant, single_mode };
enum class TerminalKind { gaussian, constant };

struct MetricFamily {
  MetricKind kind = MetricKind::flat;
  double amplitude = 0.0;  // conformal exponent amplitude, or entry bound for random_smooth
  int frequency = 1;
  std::uint64_t seed = 0;
  int modes = 2;  // highest Fourier index for random_smooth
};

/// H = k (1 + epsilon sin(2 pi m x_axis / L)) dx^1 ^ dx^2 ^ dx^3.
struct FormFamily {
  FormKind kind = FormKind::none;
  double k = 0.0;
  double epsilon = 0.0;
  int mode = 1;
  int axis = 0;
};

/// u0 = c (1 + epsilon sin(2 pi m x_axis / L)).
struct ScalarFamily {
  ScalarKind kind = ScalarKind::constant;
  double c = 1.0;
  double epsilon = 0.0;
  int mode = 1;
  int axis = 0;
};

struct TerminalFamily {
  TerminalKind kind = TerminalKind::gaussian;
  double width_cells = 3.0;
  /// Physical width; when set it overrides width_cells (refinement keeps it fixed).
  std::optional<double> width;
};

MetricField make_metric(const GridSpec& grid, const MetricFamily& f, int varying_axes);
std::optional<ThreeFormField> make_form(const GridSpec& grid, const FormFamily& f);
ScalarField make_scalar(const GridSpec& grid, const ScalarFamily& f);

/// Periodic Gaussian centred in the cell, profile over the first `varying_axes`
/// axes; the caller normalizes the mass against the metric.
ScalarField make_terminal_profile(const GridSpec& grid, const TerminalFamily& f, int varying_axes);

MetricKind parse_metric_kind(const std::string& s);
FormKind parse_form_kind(const std::string& s);
ScalarKind parse_scalar_kind(const std::string& s);
TerminalKind parse_terminal_kind(const std::string& s);

}  // namespace grf
