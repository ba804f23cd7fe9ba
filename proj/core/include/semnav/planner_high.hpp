#pragma once

#include <optional>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/grid_maps.hpp"
#include "semnav/planner_low.hpp"
#include "semnav/semantic_fusion.hpp"

namespace semnav {

enum class WaypointKind { object_goal, frontier };

struct Waypoint {
    WaypointKind kind = WaypointKind::frontier;
    MapCell target_cell;
    int source_id = 0;    // object id or frontier index
    double score = 0.0;
};

struct BlacklistEntry {
    WaypointKind kind = WaypointKind::frontier;
    MapCell cell;       // representative cell of the quantization group
    int count = 0;
    int stamp = 0;      // step of the most recent report
};

// Recently unreachable waypoints. Entries group targets within the
// quantization radius and expire blacklist_ttl steps after their last
// report, so transient failures cannot deadlock exploration.
struct Blacklist {
    std::vector<BlacklistEntry> entries;
};

// One waypoint per goal object (nearest free cell to its centroid) plus one
// per frontier cluster (centroid cell snapped to the nearest free cell).
// Candidates whose target cannot be snapped to a free cell are dropped.
std::vector<Waypoint> candidate_waypoints(const GridMaps& maps,
                                          const std::vector<SemanticObject>& objects,
                                          const std::vector<FrontierCluster>& frontiers);

// Object goals score lambda_c * confidence + lambda_v * value(target).
// Frontiers score lambda_v_frontier * (max value within value_radius_cells)
// + lambda_s * size / largest cluster - lambda_d * distance / map diameter.
// Targets the agent-sourced field marks unreachable score -infinity.
double score_waypoint(const Waypoint& w, const GridMaps& maps,
                      const std::vector<SemanticObject>& objects,
                      const std::vector<FrontierCluster>& frontiers,
                      const DistanceField& agent_field, const HighPlannerParams& params);

// True when an entry of the same kind within the quantization radius is
// still inside its TTL at the given step.
bool blacklisted(const Blacklist& blacklist, const Waypoint& w, int step,
                 const HighPlannerParams& params);

// Records a failed waypoint: increments the matching group or opens a new
// one, refreshing its stamp. Expired entries are pruned on the way.
void report_unreachable(Blacklist& blacklist, const Waypoint& w, int step,
                        const HighPlannerParams& params);

// Highest-scoring candidate that is reachable and not blacklisted. While
// any eligible object candidate's confidence reaches theta_obj, frontier
// candidates are out of the running entirely: a believed goal sighting
// always wins over exploration. Ties fall to objects over frontiers, then
// the nearest target, then the lowest source id. Returns nullopt when
// everything is filtered, which the episode loop treats as exploration
// exhausted.
std::optional<Waypoint> select_waypoint(const std::vector<Waypoint>& candidates,
                                        const std::vector<double>& scores,
                                        const std::vector<SemanticObject>& objects,
                                        const Blacklist& blacklist,
                                        const DistanceField& agent_field, int step,
                                        const HighPlannerParams& params);

}  // namespace semnav
