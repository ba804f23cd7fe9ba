#pragma once

#include <cstdint>
#include <string>

namespace semnav {

// Tunable constants, grouped by the subsystem that consumes them.
// load_config applies keys present in the JSON file on top of the
// defaults below; unknown keys are rejected so typos fail loudly.

struct WorldParams {
    int rays_x = 64;                  // horizontal ray count per observation
    int rays_y = 48;                  // vertical ray count
    double fov_h_deg = 79.0;          // horizontal field of view
    double fov_v_deg = 60.0;          // vertical field of view
    double max_range = 5.0;           // meters, real-world units
    double camera_height = 0.88;      // meters above the floor
    double confidence_gain = 10.0;    // confidence = 1 + gain * quality
    double drift_position_std = 0.01; // meters per step
    double drift_yaw_std_deg = 0.2;   // degrees per step
    double drift_pullback = 0.95;     // random-walk contraction per step
    double min_subtend_deg = 2.0;     // objects below this angular size are missed
    bool false_positives = false;     // emit spurious detections
    int feature_dim = 32;             // category embedding dimension
    double feature_noise_std = 0.05;  // per-detection embedding jitter
};

struct ScaleParams {
    int ransac_iterations = 200;
    double ransac_tolerance = 0.02;     // perception-frame units
    double min_inlier_fraction = 0.5;   // below this the fit is rejected
    double ema_alpha = 0.3;             // smoothing for per-keyframe re-estimates
    double camera_height = 0.88;        // meters, assumed real height
    double min_up_normal = 0.8;         // reject fits whose normal tilts off vertical
};

struct MemoryParams {
    double keyframe_novelty = 0.333;    // insert when overlap < 1 - this
    double min_inlier_ratio = 0.3;      // relocalization acceptance bar
    double reloc_yaw_step_deg = 15.0;
    int reloc_top_k = 8;                // keyframes tried per relocalization
    int capacity = 0;                   // 0 = unbounded; else evict oldest context
    double overlap_voxel_size = 0.2;    // meters, for the novelty overlap test
};

struct FusionParams {
    double w_visual = 0.5;
    double w_geometric = 0.5;
    double tau = 0.55;                  // association acceptance threshold
    double voxel_size = 0.1;            // meters, cloud dedup resolution
    double confidence_threshold = 1.9;  // points below are discarded
};

struct MapParams {
    double cell_size = 0.1;      // meters
    double height_min = 0.15;    // obstacle band, meters above floor
    double height_max = 1.6;
    int min_frontier_size = 3;   // clusters smaller than this are noise
};

struct HighPlannerParams {
    double lambda_c = 0.6;       // object score: confidence weight
    double lambda_v = 0.4;       // object score: value weight
    double lambda_v_frontier = 0.5;
    double lambda_s = 0.2;       // frontier size weight
    double lambda_d = 0.3;       // frontier distance penalty
    double theta_obj = 0.5;      // commit to an object above this confidence
    int value_radius_cells = 5;  // frontier value lookup neighborhood
    int unreachable_collisions = 5;
    int replan_period = 15;      // steps
    int reached_cells = 2;       // waypoint arrival tolerance
    int blacklist_ttl = 100;     // steps
    int blacklist_quant_cells = 3;
};

struct LowPlannerParams {
    double unknown_speed = 0.5;        // traversal speed of unexplored cells
    int inflation_cells = 2;           // obstacle dilation radius
    double heading_tolerance_deg = 15.0;
    double lookahead = 0.5;            // meters, subgoal horizon along the path
    double stop_radius = 1.0;          // meters, success distance to target
};

struct EpisodeParams {
    int max_steps = 300;
    double forward_step = 0.25;        // meters
    double turn_deg = 30.0;
    double context_spawn_radius = 1.0; // meters around context endpoint
    double stop_margin = 0.8;          // stop when estimated dist < margin * stop_radius
};

struct Config {
    WorldParams world;
    ScaleParams scale;
    MemoryParams memory;
    FusionParams fusion;
    MapParams maps;
    HighPlannerParams planner_high;
    LowPlannerParams planner_low;
    EpisodeParams episode;
};

// Parse JSON at path and overlay it on defaults. Throws std::runtime_error
// on missing file, malformed JSON, unknown keys, or wrong value types.
Config load_config(const std::string& path);

// Overlay a JSON string (same rules as load_config).
Config parse_config(const std::string& json_text);

std::string config_to_json(const Config& config);

void save_config(const Config& config, const std::string& path);

}  // namespace semnav
