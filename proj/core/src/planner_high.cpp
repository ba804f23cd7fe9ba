#include "semnav/planner_high.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// How far snapping may wander from the nominal target before the candidate
// is dropped as unplaceable.
constexpr int kSnapRadius = 25;

// Nearest free cell by (squared distance, cz, cx); the lexicographic tail
// keeps equidistant picks deterministic.
std::optional<MapCell> nearest_free(const GridMaps& maps, const MapCell& from) {
    std::optional<MapCell> best;
    long long best_d2 = 0;
    for (int dz = -kSnapRadius; dz <= kSnapRadius; ++dz)
        for (int dx = -kSnapRadius; dx <= kSnapRadius; ++dx) {
            const MapCell c{from.cx + dx, from.cz + dz};
            if (maps.obstacle_at(c) != CellState::free) continue;
            const long long d2 = static_cast<long long>(dx) * dx + static_cast<long long>(dz) * dz;
            if (!best || d2 < best_d2 ||
                (d2 == best_d2 && (c.cz < best->cz || (c.cz == best->cz && c.cx < best->cx)))) {
                best = c;
                best_d2 = d2;
            }
        }
    return best;
}

Vec3 cloud_centroid(const PointCloud& cloud) {
    Vec3 sum{0.0, 0.0, 0.0};
    for (const Vec3& p : cloud.points) {
        sum.x += p.x;
        sum.y += p.y;
        sum.z += p.z;
    }
    const double inv = 1.0 / static_cast<double>(cloud.size());
    return {sum.x * inv, sum.y * inv, sum.z * inv};
}

const SemanticObject* find_object(const std::vector<SemanticObject>& objects, int id) {
    for (const SemanticObject& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

double cell_dist(const MapCell& a, const MapCell& b) {
    return std::hypot(a.cx - b.cx, a.cz - b.cz);
}

}  // namespace

std::vector<Waypoint> candidate_waypoints(const GridMaps& maps,
                                          const std::vector<SemanticObject>& objects,
                                          const std::vector<FrontierCluster>& frontiers) {
    std::vector<Waypoint> out;
    for (const SemanticObject& obj : objects) {
        if (obj.cloud.size() == 0) continue;
        const MapCell at = world_to_cell(maps.spec, cloud_centroid(obj.cloud));
        if (const auto target = nearest_free(maps, at))
            out.push_back({WaypointKind::object_goal, *target, obj.id, 0.0});
    }
    for (std::size_t i = 0; i < frontiers.size(); ++i) {
        const MapCell at = world_to_cell(maps.spec, frontiers[i].centroid);
        if (const auto target = nearest_free(maps, at))
            out.push_back({WaypointKind::frontier, *target, static_cast<int>(i), 0.0});
    }
    return out;
}

double score_waypoint(const Waypoint& w, const GridMaps& maps,
                      const std::vector<SemanticObject>& objects,
                      const std::vector<FrontierCluster>& frontiers,
                      const DistanceField& agent_field, const HighPlannerParams& params) {
    const double dist = agent_field.at(w.target_cell);
    if (!(dist < kInf)) return -kInf;

    if (w.kind == WaypointKind::object_goal) {
        const SemanticObject* obj = find_object(objects, w.source_id);
        if (obj == nullptr) return -kInf;
        return params.lambda_c * obj->confidence + params.lambda_v * maps.value_at(w.target_cell);
    }

    if (w.source_id < 0 || static_cast<std::size_t>(w.source_id) >= frontiers.size()) return -kInf;
    const FrontierCluster& cluster = frontiers[w.source_id];

    const int r = params.value_radius_cells;
    double best_value = 0.0;
    for (int dz = -r; dz <= r; ++dz)
        for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dz * dz > r * r) continue;
            best_value = std::max(
                best_value, maps.value_at({w.target_cell.cx + dx, w.target_cell.cz + dz}));
        }

    int largest = 1;
    for (const FrontierCluster& f : frontiers) largest = std::max(largest, f.size);
    const double size_norm = static_cast<double>(cluster.size) / largest;

    const double diameter =
        std::hypot(maps.spec.width, maps.spec.height) * maps.spec.cell_size;
    const double dist_norm = dist / diameter;

    return params.lambda_v_frontier * best_value + params.lambda_s * size_norm -
           params.lambda_d * dist_norm;
}

bool blacklisted(const Blacklist& blacklist, const Waypoint& w, int step,
                 const HighPlannerParams& params) {
    for (const BlacklistEntry& e : blacklist.entries) {
        if (e.kind != w.kind) continue;
        if (step - e.stamp >= params.blacklist_ttl) continue;
        if (cell_dist(e.cell, w.target_cell) <= params.blacklist_quant_cells) return true;
    }
    return false;
}

void report_unreachable(Blacklist& blacklist, const Waypoint& w, int step,
                        const HighPlannerParams& params) {
    auto expired = [&](const BlacklistEntry& e) { return step - e.stamp >= params.blacklist_ttl; };
    blacklist.entries.erase(
        std::remove_if(blacklist.entries.begin(), blacklist.entries.end(), expired),
        blacklist.entries.end());
    for (BlacklistEntry& e : blacklist.entries) {
        if (e.kind != w.kind) continue;
        if (cell_dist(e.cell, w.target_cell) > params.blacklist_quant_cells) continue;
        ++e.count;
        e.stamp = step;
        return;
    }
    blacklist.entries.push_back({w.kind, w.target_cell, 1, step});
}

std::optional<Waypoint> select_waypoint(const std::vector<Waypoint>& candidates,
                                        const std::vector<double>& scores,
                                        const std::vector<SemanticObject>& objects,
                                        const Blacklist& blacklist,
                                        const DistanceField& agent_field, int step,
                                        const HighPlannerParams& params) {
    if (scores.size() != candidates.size())
        throw std::invalid_argument("select_waypoint: one score per candidate required");
    bool committed = false;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Waypoint& w = candidates[i];
        if (w.kind != WaypointKind::object_goal) continue;
        if (!(scores[i] > -kInf) || blacklisted(blacklist, w, step, params)) continue;
        const SemanticObject* obj = find_object(objects, w.source_id);
        if (obj != nullptr && obj->confidence >= params.theta_obj) {
            committed = true;
            break;
        }
    }

    std::optional<Waypoint> best;
    double best_score = -kInf;
    double best_dist = kInf;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Waypoint& w = candidates[i];
        const double s = scores[i];
        if (!(s > -kInf)) continue;
        if (committed && w.kind != WaypointKind::object_goal) continue;
        if (blacklisted(blacklist, w, step, params)) continue;
        const double d = agent_field.at(w.target_cell);
        const bool wins =
            !best || s > best_score ||
            (s == best_score &&
             (static_cast<int>(w.kind) < static_cast<int>(best->kind) ||
              (w.kind == best->kind &&
               (d < best_dist || (d == best_dist && w.source_id < best->source_id)))));
        if (wins) {
            best = w;
            best->score = s;
            best_score = s;
            best_dist = d;
        }
    }
    return best;
}

}  // namespace semnav
