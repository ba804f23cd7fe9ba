#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/grid_maps.hpp"
#include "semnav/memory_bank.hpp"
#include "semnav/semantic_fusion.hpp"
#include "semnav/world.hpp"

namespace semnav {

// Closed-loop episode driver: observe, remember, fuse, map, plan, act, until
// the agent issues stop or runs out of budget. The agent sees only the
// perception stream; the world is consulted again solely to step the dynamics
// and to grade the outcome.

struct EpisodeSpec {
    std::string goal_category;       // empty = explore only, stop never fires
    Vec3 start;                      // floor position, world frame
    double start_yaw = 0.0;          // radians
    int max_steps = 300;
    std::string context_bank_path;   // empty = no prior tour
    uint64_t seed = 0;               // drift stream for this episode
};

enum class EpisodeStatus { success, stop_miss, step_limit, explored_out };

const char* status_name(EpisodeStatus s);

struct EpisodeResult {
    bool success = false;
    EpisodeStatus status = EpisodeStatus::step_limit;
    int steps = 0;                   // every executed action, stop included
    double path_length = 0.0;        // true meters walked
    double shortest_length = 0.0;    // oracle lower bound from the start pose
    double dtg = 0.0;                // oracle distance to goal at termination
    std::vector<Pose> trajectory;    // estimated floor poses, map frame
    std::vector<Action> actions;     // executed sequence, replayable
    bool context_used = false;       // a bank was loaded and relocalized
    bool reloc_ok = false;
    int collisions = 0;
    GridMaps maps;                   // final rasters, for rendering
    ObjectStore store;               // final fused objects
};

// Runs one episode. Throws std::invalid_argument if the start cell is not
// free walkable space or max_steps < 1; the context bank path, if set, must
// load (std::runtime_error otherwise). Planner dead ends never throw; they
// land in the returned status.
EpisodeResult run_episode(const World& world, const EpisodeSpec& spec, const Config& config);

// The fused object store implied by a bank: every keyframe's detections
// filtered at the bank's scale and ingested in keyframe order. The store an
// episode carries is exactly this function of its bank, so a context bank
// recorded along a walked trajectory reproduces the walker's fused objects.
// Throws std::runtime_error if keyframes are present but the scale is not.
ObjectStore fuse_bank(const MemoryBank& bank, const FusionParams& fusion);

struct MetricsSummary {
    double sr = 0.0;          // success rate
    double spl = 0.0;         // success weighted by path efficiency
    double mean_dtg = 0.0;    // over all episodes
    double mean_steps = 0.0;  // over all episodes
};

// Aggregates over all episodes (failures included in every mean). The SPL
// term of an episode is success * shortest / max(walked, shortest), taken as
// plain success when the start is already inside the goal radius. Throws
// std::invalid_argument on an empty list.
MetricsSummary compute_metrics(const std::vector<EpisodeResult>& results);

// Per-episode SPL term, exposed for reporting.
double spl_term(const EpisodeResult& r);

// Replays a scripted tour through the simulator, building a context bank of
// keyframes, and saves it as a bank archive at out_path. The final floor
// pose is stored as the bank endpoint so later episodes can spawn nearby.
// Throws std::invalid_argument naming the step index if an action collides
// (a valid tour stays in free space); an empty action list still yields a
// one-keyframe bank from the initial observation.
MemoryBank record_context_video(const World& world, const Vec3& start, double start_yaw,
                                const std::vector<Action>& actions, uint64_t seed,
                                const Config& config, const std::string& out_path);

// Writes composite.ppm, value.pgm, obstacle.pgm and explored.pgm for the
// episode into out_dir (created if missing). Byte-deterministic for a given
// result.
void render_episode(const EpisodeResult& result, const std::string& out_dir);

}  // namespace semnav
