#pragma once

#include <limits>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/grid_maps.hpp"
#include "semnav/semantic_fusion.hpp"
#include "semnav/world.hpp"

namespace semnav {

// Geodesic cost-to-go in meters over the map window. Goal cells hold 0,
// blocked cells and cells the front never reached hold +infinity.
struct DistanceField {
    GridSpec spec;
    std::vector<double> values;      // row-major over the window
    std::vector<MapCell> goal_cells;

    double at(MapCell c) const;      // +infinity outside the window
};

struct PlannedPath {
    std::vector<MapCell> cells;  // start through goal, consecutive 8-adjacent
    double length = 0.0;         // meters, sum of step lengths
};

// Multi-source eikonal solve (first-order upwind fast marching over the
// 8-neighbor stencil) from the goal cells outward. Obstacles are dilated
// by inflate_radius cells first; free cells propagate at unit speed and
// unknown cells at params.unknown_speed so frontiers stay reachable.
// Cells listed in carve are forced traversable at unit speed, letting
// distance-to-object queries seed inside an object footprint. The front
// stops expanding past max_value; cells beyond it read +infinity. Throws
// std::runtime_error when every goal is blocked after inflation.
DistanceField fmm_solve(const GridMaps& maps, const std::vector<MapCell>& goals,
                        int inflate_radius, const LowPlannerParams& params,
                        const std::vector<MapCell>& carve = {},
                        double max_value = std::numeric_limits<double>::infinity());

// Steepest-descent walk from start to the nearest goal cell. Field values
// strictly decrease along the path; neighbor ties resolve in the fixed
// order E, NE, N, NW, W, SW, S, SE (east = +x, north = -z). Throws
// std::runtime_error when the field is infinite at start.
PlannedPath extract_path(const DistanceField& field, MapCell start);

// One locomotion command toward the path. The subgoal is the farthest
// path cell within params.lookahead meters and clear line of sight; turn
// toward it while the heading error exceeds the tolerance, re-level the
// camera when pitched past the same tolerance, otherwise step forward.
// Never emits stop. Pose is in the map (metric) frame.
Action next_action(const PlannedPath& path, const GridMaps& maps, const Pose& pose,
                   const LowPlannerParams& params);

// True when some goal object with confidence >= conf_floor has its
// centroid within stop_radius meters of the agent along traversable
// space. An object dead ahead through a wall does not trigger a stop.
bool check_stop(const GridMaps& maps, const Pose& agent_pose,
                const std::vector<SemanticObject>& goal_objects,
                double stop_radius, double conf_floor, const LowPlannerParams& params);

}  // namespace semnav
