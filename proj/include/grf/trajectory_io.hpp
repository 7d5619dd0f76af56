#pragma once

#include <string>

#include "grf/flow.hpp"
#include "grf/json_io.hpp"

namespace grf {

// Layout:
// {"format": "grf-trajectory", "version": 1,
//  "grid": {"dim", "points": [..], "side": [..]},
//  "frozen": bool, "times": [..], "step_sizes": [..], "substeps": [..],
//  "snapshots": [{"t", "metric": [one row-major array per upper-triangle
//                                 component (0,0), (0,1), ...],
//                 "h_coefficient": array or null}]}
Json grid_to_json(const GridSpec& grid);
GridSpec grid_from_json(const Json& j);

Json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const Json& j);

void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

Json field_to_json(const ScalarField& f);
ScalarField field_from_json(const GridSpec& grid, const Json& j);

}  // namespace grf
