#include "grf/trajectory_io.hpp"

#include <fstream>

namespace grf {

Json grid_to_json(const GridSpec& grid) {
  Json points = Json::array(), side = Json::array();
  for (int a = 0; a < grid.dim(); ++a) {
    points.push_back(grid.points(a));
    side.push_back(grid.side(a));
  }
  return {{"dim", grid.dim()}, {"points", points}, {"side", side}};
}

GridSpec grid_from_json(const Json& j) {
  const int dim = j.at("dim").get<int>();
  std::array<int, 3> points{1, 1, 1};
  std::array<double, 3> side{1.0, 1.0, 1.0};
  if (j.at("points").size() != static_cast<std::size_t>(dim) || j.at("side").size() != static_cast<std::size_t>(dim))
    throw ShapeError("grid points/side arrays must have one entry per axis");
  for (int a = 0; a < dim; ++a) {
    points[a] = j.at("points")[a].get<int>();
    side[a] = j.at("side")[a].get<double>();
  }
  return GridSpec(dim, points, side);
}

Json field_to_json(const ScalarField& f) {
  return Json(std::vector<double>(f.values.data(), f.values.data() + f.values.size()));
}

ScalarField field_from_json(const GridSpec& grid, const Json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != grid.size()) throw ShapeError("field array length does not match the grid");
  ScalarField f(grid);
  for (std::size_t p = 0; p < v.size(); ++p) f[p] = v[p];
  return f;
}

Json trajectory_to_json(const Trajectory& traj) {
  const GridSpec& grid = traj.grid();
  const int nc = sym_components(grid.dim());
  Json snaps = Json::array();
  for (const FlowState& s : traj.states()) {
    Json metric = Json::array();
    for (int c = 0; c < nc; ++c) {
      std::vector<double> col(grid.size());
      for (std::size_t p = 0; p < grid.size(); ++p) col[p] = s.g.base().values(static_cast<Eigen::Index>(p), c);
      metric.push_back(col);
    }
    snaps.push_back({{"t", s.t}, {"metric", metric}, {"h_coefficient", s.h ? field_to_json(s.h->coefficient) : Json()}});
  }
  return {{"format", "grf-trajectory"},
          {"version", 1},
          {"grid", grid_to_json(grid)},
          {"frozen", traj.is_frozen()},
          {"times", traj.times()},
          {"step_sizes", traj.step_sizes()},
          {"substeps", traj.substeps()},
          {"snapshots", snaps}};
}

Trajectory trajectory_from_json(const Json& j) {
  if (j.value("format", "") != "grf-trajectory") throw ParameterError("not a grf-trajectory document");
  if (j.value("version", 0) != 1) throw ParameterError("unsupported trajectory version");
  const GridSpec grid = grid_from_json(j.at("grid"));
  const int nc = sym_components(grid.dim());
  std::vector<FlowState> states;
  for (const Json& snap : j.at("snapshots")) {
    const Json& metric = snap.at("metric");
    if (metric.size() != static_cast<std::size_t>(nc)) throw ShapeError("metric component count mismatch");
    SymTensorField g(grid);
    for (int c = 0; c < nc; ++c) {
      const ScalarField col = field_from_json(grid, metric[c]);
      g.values.col(c) = col.values;
    }
    std::optional<ThreeFormField> h;
    if (!snap.at("h_coefficient").is_null()) h = ThreeFormField(field_from_json(grid, snap.at("h_coefficient")));
    states.emplace_back(MetricField(std::move(g)), std::move(h), snap.at("t").get<double>());
  }
  return Trajectory(std::move(states), j.at("step_sizes").get<std::vector<double>>(),
                    j.at("substeps").get<std::vector<int>>(), j.value("frozen", false));
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot open " + path + " for writing");
  write_json(os, trajectory_to_json(traj));
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open " + path);
  return trajectory_from_json(Json::parse(is));
}

}  // namespace grf
