#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/rng.hpp"

namespace semnav {

// Synthetic indoor worlds on a cell grid, plus the perception oracle that
// mimics the output contract of a monocular SLAM + open-vocabulary detector
// stack: point clouds at an arbitrary hidden scale, per-point confidence,
// drifting pose estimates, and category detections.
//
// World units are meters. The floor is y = 0, walls rise to kWallHeight,
// grid cell (row, col) covers x in [col, col+1)*cell_size and
// z in [row, row+1)*cell_size. The camera rides at world.camera_height.
//
// The perception frame is anchored at the camera position of the first
// observation and divides all coordinates by the hidden scale_factor.

inline constexpr double kWallHeight = 3.0;

struct GridCell {
    int row = 0;
    int col = 0;
    bool operator==(const GridCell&) const = default;
};

struct WorldObject {
    std::string category;
    std::vector<GridCell> cells;  // footprint, on free floor cells
    double height = 1.0;          // box from floor to this, meters
};

struct World {
    double cell_size = 0.25;        // meters per grid cell
    std::vector<std::string> grid;  // '#' wall, '.' free; rectangular
    std::vector<WorldObject> objects;
    double camera_height = 0.88;    // meters
    double scale_factor = 1.0;      // hidden perception scale, in [0.2, 5]
    uint64_t seed = 0;

    int rows() const { return static_cast<int>(grid.size()); }
    int cols() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < rows() && col >= 0 && col < cols();
    }
    bool is_wall(int row, int col) const {
        return !in_bounds(row, col) || grid[row][col] == '#';
    }
    bool is_free(int row, int col) const { return !is_wall(row, col); }

    GridCell cell_of(const Vec3& p) const;
    Vec3 cell_center(const GridCell& cell) const;  // y = 0

    // occupancy by any object footprint; -1 if none
    int object_at(int row, int col) const;
    bool blocked(int row, int col) const {  // for motion, not for the oracle metric
        return is_wall(row, col) || object_at(row, col) >= 0;
    }
};

// Throws std::runtime_error naming the violated rule.
void validate_world(const World& world);

World load_world(const std::string& path);
void save_world(const World& world, const std::string& path);

// Procedural multi-room floor plan: rooms on a grid, door gaps along a
// random spanning tree plus extra loops, one or two objects per category.
// Deterministic in (seed, n_rooms, categories).
World generate_world(uint64_t seed, int n_rooms, const std::vector<std::string>& categories);

// ---- categories ----------------------------------------------------------

struct CategorySpec {
    std::string name;
    int footprint_rows;
    int footprint_cols;
    double height;
};

const std::vector<CategorySpec>& standard_categories();
const CategorySpec* find_category(const std::string& name);

// Stable unit embedding per category name (seeded by a hash of the name).
FeatureVec category_embedding(const std::string& name, int dim);

// ---- actions and dynamics -------------------------------------------------

enum class Action { move_forward, turn_left, turn_right, look_up, look_down, stop };

const char* action_name(Action a);

struct StepOutcome {
    Pose pose;
    bool collided = false;
};

// Forward moves params.forward_step meters unless the swept segment crosses
// a wall or object cell (then the pose is unchanged and collided is set).
// Turns are +/- params.turn_deg about yaw; looks pitch by the same quantum,
// clamped to [-60, 60] degrees. stop leaves the pose unchanged.
StepOutcome step_dynamics(const World& world, const Pose& pose, Action action,
                          const EpisodeParams& params);

// ---- perception oracle -----------------------------------------------------

struct Detection {
    std::string category;
    std::vector<int> point_indices;  // into Observation::cloud
    double detector_confidence = 0.0;
    FeatureVec feature;
};

struct Observation {
    PointCloud cloud;    // perception frame (true coords / scale, drift applied)
    Pose estimated_pose; // camera pose in the perception frame
    std::vector<Detection> detections;
    int frame_id = 0;
};

// Pose-estimate drift: planar random walk with pull-back toward zero,
// standing in for a SLAM backend whose loop closures keep error bounded.
// Offsets are stored in true meters and injected into the perception frame
// scaled by 1/scale_factor.
struct DriftState {
    Vec3 offset;            // y stays 0
    double yaw_offset = 0.0;
    SplitMix64 rng{0};
};

DriftState make_drift_state(uint64_t world_seed, uint64_t episode_seed);
void advance_drift(DriftState& drift, const WorldParams& params);

// Anchor of the perception frame: camera position at episode start.
struct PerceptionFrame {
    Vec3 origin;  // first camera position, true world coords
};

// Ray-casts a rays_x * rays_y angular grid against walls, object boxes and
// the floor within max_range; first hit per ray wins. Emits one Detection per
// object whose hit rays subtend at least min_subtend_deg. Deterministic in
// (world.seed, frame_id).
Observation observe(const World& world, const Pose& true_camera_pose,
                    const DriftState& drift, const PerceptionFrame& frame, int frame_id,
                    const WorldParams& params);

// Camera pose for an agent standing at floor position (x, z).
Pose camera_pose(const World& world, const Vec3& floor_position, double yaw,
                 double pitch = 0.0);

// ---- evaluation oracles ----------------------------------------------------

// Shortest path on the 8-connected free grid, octile costs * cell_size,
// diagonal steps disallowed across blocked corners. Walls block; object
// footprints do not (they sit on free cells and goals live inside them).
// Infinity when disconnected; throws std::invalid_argument off free cells.
double geodesic_distance(const World& world, const Vec3& p, const Vec3& q);

// Multi-source geodesic field from every footprint cell of `category`,
// evaluated on a grid subdivided `refine`-fold for near-continuous accuracy.
// values are meters; walls are +infinity.
struct GeodesicField {
    int rows = 0, cols = 0;     // refined grid shape
    double cell = 0.0;          // refined cell size, meters
    std::vector<double> values; // row-major
    double at(const Vec3& p) const;
};

GeodesicField object_distance_field(const World& world, const std::string& category,
                                    int refine = 5);

// Uniformly samples a free floor position with the given wall/object
// clearance (meters). Throws std::runtime_error if none found.
Vec3 sample_free_position(const World& world, SplitMix64& rng, double clearance);

bool position_clear(const World& world, const Vec3& p, double clearance);

}  // namespace semnav
