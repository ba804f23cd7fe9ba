#include "semnav/planner_low.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <stdexcept>
#include <utility>

namespace semnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neighbor offsets in the fixed tie order E, NE, N, NW, W, SW, S, SE with
// east = +x and north = -z. Axes sit at even slots, diagonals at odd ones.
constexpr int kDX[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDZ[8] = {0, -1, -1, -1, 0, 1, 1, 1};

// Cells this close to a goal with a straight unit-speed sightline get their
// exact Euclidean distance up front. The upwind stencil then transports an
// already-accurate front instead of amplifying the large curvature error
// next to a point source.
constexpr int kSeedRadius = 6;

int win_index(const GridSpec& spec, const MapCell& c) {
    return (c.cz - spec.off_z) * spec.width + (c.cx - spec.off_x);
}

double planar_dist(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.z - b.z);
}

// True when every cell sampled along the segment satisfies pred.
bool walk_segment(const GridSpec& spec, const Vec3& from, const Vec3& to,
                  const std::function<bool(const MapCell&)>& pred) {
    const double dx = to.x - from.x;
    const double dz = to.z - from.z;
    const double len = std::hypot(dx, dz);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / (spec.cell_size / 3.0))));
    for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        const MapCell c = world_to_cell(spec, {from.x + t * dx, 0.0, from.z + t * dz});
        if (!pred(c)) return false;
    }
    return true;
}

}  // namespace

double DistanceField::at(MapCell c) const {
    if (!in_bounds(spec, c)) return kInf;
    return values[win_index(spec, c)];
}

DistanceField fmm_solve(const GridMaps& maps, const std::vector<MapCell>& goals,
                        int inflate_radius, const LowPlannerParams& params,
                        const std::vector<MapCell>& carve, double max_value) {
    const GridSpec& spec = maps.spec;
    const int W = spec.width;
    const int H = spec.height;
    const int n = W * H;
    const double h = spec.cell_size;

    // traversal speed per cell, 0 = blocked
    std::vector<double> speed(n, 0.0);
    for (int i = 0; i < n; ++i) {
        switch (maps.obstacle[i]) {
            case CellState::free: speed[i] = 1.0; break;
            case CellState::unknown: speed[i] = std::max(0.0, params.unknown_speed); break;
            case CellState::obstacle: break;
        }
    }

    if (inflate_radius > 0) {
        std::vector<std::pair<int, int>> disc;
        for (int dz = -inflate_radius; dz <= inflate_radius; ++dz)
            for (int dx = -inflate_radius; dx <= inflate_radius; ++dx)
                if (dx * dx + dz * dz <= inflate_radius * inflate_radius)
                    disc.emplace_back(dx, dz);
        std::vector<char> blocked(n, 0);
        for (int wz = 0; wz < H; ++wz)
            for (int wx = 0; wx < W; ++wx) {
                if (maps.obstacle[wz * W + wx] != CellState::obstacle) continue;
                for (const auto& [dx, dz] : disc) {
                    const int nx = wx + dx;
                    const int nz = wz + dz;
                    if (nx >= 0 && nx < W && nz >= 0 && nz < H) blocked[nz * W + nx] = 1;
                }
            }
        for (int i = 0; i < n; ++i)
            if (blocked[i]) speed[i] = 0.0;
    }

    for (const MapCell& c : carve)
        if (in_bounds(spec, c)) speed[win_index(spec, c)] = 1.0;

    std::vector<MapCell> live_goals;
    for (const MapCell& g : goals)
        if (in_bounds(spec, g) && speed[win_index(spec, g)] > 0.0) live_goals.push_back(g);
    if (live_goals.empty()) throw std::runtime_error("fmm_solve: all goals blocked");

    DistanceField field;
    field.spec = spec;
    field.goal_cells = live_goals;
    field.values.assign(n, kInf);
    std::vector<double>& value = field.values;
    std::vector<char> known(n, 0);

    using Node = std::pair<double, int>;
    std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;

    for (const MapCell& g : live_goals) {
        value[win_index(spec, g)] = 0.0;
        open.emplace(0.0, win_index(spec, g));
    }

    // Exact near-source band: straight sightline over unit-speed cells makes
    // the Euclidean distance the true solution there.
    auto unit_free = [&](const MapCell& c) {
        return in_bounds(spec, c) && speed[win_index(spec, c)] == 1.0;
    };
    for (const MapCell& g : live_goals) {
        if (!unit_free(g)) continue;
        const Vec3 pg = cell_to_world(spec, g);
        for (int dz = -kSeedRadius; dz <= kSeedRadius; ++dz)
            for (int dx = -kSeedRadius; dx <= kSeedRadius; ++dx) {
                if (dx == 0 && dz == 0) continue;
                const MapCell c{g.cx + dx, g.cz + dz};
                if (!unit_free(c)) continue;
                const double d = std::hypot(dx, dz) * h;
                const int i = win_index(spec, c);
                if (d >= value[i]) continue;
                if (!walk_segment(spec, pg, cell_to_world(spec, c), unit_free)) continue;
                value[i] = d;
                open.emplace(d, i);
            }
    }

    // One relaxation of cell (wx, wz) from its frozen neighbors: plain steps
    // along the eight edges plus the two-point planar front through each
    // axis neighbor and an adjacent diagonal.
    auto relax = [&](int wx, int wz) {
        const int i = wz * W + wx;
        const double sh = h / speed[i];
        double u[8];
        for (int k = 0; k < 8; ++k) {
            const int nx = wx + kDX[k];
            const int nz = wz + kDZ[k];
            u[k] = (nx >= 0 && nx < W && nz >= 0 && nz < H && known[nz * W + nx])
                       ? value[nz * W + nx]
                       : kInf;
        }
        double best = kInf;
        for (int k = 0; k < 8; ++k)
            if (u[k] < kInf) best = std::min(best, u[k] + sh * ((k & 1) ? M_SQRT2 : 1.0));
        for (int a = 0; a < 8; a += 2)
            for (const int b : {(a + 1) & 7, (a + 7) & 7}) {
                if (u[a] >= kInf || u[b] >= kInf) continue;
                const double delta = u[a] - u[b];
                if (delta < 0.0 || 2.0 * delta * delta > sh * sh) continue;
                best = std::min(best, u[a] + std::sqrt(sh * sh - delta * delta));
            }
        return best;
    };

    while (!open.empty()) {
        const auto [v, i] = open.top();
        open.pop();
        if (known[i] || v > value[i]) continue;
        if (v > max_value) break;
        known[i] = 1;
        const int wx = i % W;
        const int wz = i / W;
        for (int k = 0; k < 8; ++k) {
            const int nx = wx + kDX[k];
            const int nz = wz + kDZ[k];
            if (nx < 0 || nx >= W || nz < 0 || nz >= H) continue;
            const int j = nz * W + nx;
            if (known[j] || speed[j] <= 0.0) continue;
            const double cand = relax(nx, nz);
            if (cand < value[j]) {
                value[j] = cand;
                open.emplace(cand, j);
            }
        }
    }

    // values past the cutoff were never frozen and are not trustworthy
    if (max_value < kInf)
        for (int i = 0; i < n; ++i)
            if (!known[i]) value[i] = kInf;
    return field;
}

PlannedPath extract_path(const DistanceField& field, MapCell start) {
    const GridSpec& spec = field.spec;
    if (!(field.at(start) < kInf))
        throw std::runtime_error("extract_path: start is unreachable");

    std::set<std::pair<int, int>> goal_set;
    for (const MapCell& g : field.goal_cells) goal_set.emplace(g.cx, g.cz);

    PlannedPath path;
    path.cells.push_back(start);
    const std::size_t cell_budget = static_cast<std::size_t>(spec.width) * spec.height + 1;
    MapCell cur = start;
    while (goal_set.count({cur.cx, cur.cz}) == 0) {
        const double here = field.at(cur);
        double best = here;
        int pick = -1;
        for (int k = 0; k < 8; ++k) {
            const double v = field.at({cur.cx + kDX[k], cur.cz + kDZ[k]});
            if (v < best) {
                best = v;
                pick = k;
            }
        }
        if (pick < 0) throw std::runtime_error("extract_path: descent stalled");
        cur = {cur.cx + kDX[pick], cur.cz + kDZ[pick]};
        path.cells.push_back(cur);
        path.length += spec.cell_size * ((pick & 1) ? M_SQRT2 : 1.0);
        if (path.cells.size() > cell_budget)
            throw std::runtime_error("extract_path: descent cycle");
    }
    return path;
}

Action next_action(const PlannedPath& path, const GridMaps& maps, const Pose& pose,
                   const LowPlannerParams& params) {
    if (path.cells.empty()) throw std::invalid_argument("next_action: empty path");
    const GridSpec& spec = maps.spec;

    auto not_obstacle = [&](const MapCell& c) {
        return maps.obstacle_at(c) != CellState::obstacle;
    };

    // farthest path cell in range with a clear sightline, else the path head
    Vec3 subgoal = cell_to_world(spec, path.cells.front());
    for (std::size_t i = path.cells.size(); i-- > 0;) {
        const Vec3 p = cell_to_world(spec, path.cells[i]);
        if (planar_dist(p, pose.position) > params.lookahead) continue;
        if (walk_segment(spec, pose.position, p, not_obstacle)) {
            subgoal = p;
            break;
        }
    }

    const double dx = subgoal.x - pose.position.x;
    const double dz = subgoal.z - pose.position.z;
    const double tol = params.heading_tolerance_deg * M_PI / 180.0;
    double err = 0.0;
    if (std::hypot(dx, dz) > 1e-9)
        err = std::remainder(std::atan2(-dz, dx) - pose.yaw, 2.0 * M_PI);
    if (std::abs(err) > tol) return err > 0.0 ? Action::turn_left : Action::turn_right;
    if (std::abs(pose.pitch) > tol) return pose.pitch > 0.0 ? Action::look_down : Action::look_up;
    return Action::move_forward;
}

bool check_stop(const GridMaps& maps, const Pose& agent_pose,
                const std::vector<SemanticObject>& goal_objects,
                double stop_radius, double conf_floor, const LowPlannerParams& params) {
    const MapCell agent = world_to_cell(maps.spec, agent_pose.position);
    if (!in_bounds(maps.spec, agent)) return false;

    for (const SemanticObject& obj : goal_objects) {
        if (obj.confidence < conf_floor || obj.cloud.size() == 0) continue;
        Vec3 centroid{0.0, 0.0, 0.0};
        for (const Vec3& p : obj.cloud.points) {
            centroid.x += p.x;
            centroid.y += p.y;
            centroid.z += p.z;
        }
        const double inv = 1.0 / static_cast<double>(obj.cloud.size());
        centroid = {centroid.x * inv, centroid.y * inv, centroid.z * inv};

        // The object body is traversable for this query only: the front must
        // escape the footprint, while walls keep blocking.
        const MapCell goal = world_to_cell(maps.spec, centroid);
        std::vector<MapCell> carve{goal};
        for (const Vec3& p : obj.cloud.points) carve.push_back(world_to_cell(maps.spec, p));

        DistanceField field;
        try {
            field = fmm_solve(maps, {goal}, 0, params, carve, stop_radius);
        } catch (const std::runtime_error&) {
            continue;  // centroid outside the mapped window
        }
        if (field.at(agent) <= stop_radius) return true;
    }
    return false;
}

}  // namespace semnav
