#include "semnav/episode_runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>

#include "semnav/planner_high.hpp"
#include "semnav/planner_low.hpp"

static const bool kTrace = std::getenv("SEMNAV_TRACE") != nullptr;

namespace semnav {
namespace {

// Continuous shortest paths are bracketed by the 8-connected oracle within
// sec(pi/8), so dividing the octile length out by this (after shaving grid
// slack) lower-bounds the length of any real path that reaches the goal.
constexpr double kOctileOverrun = 1.0823922002923940;

Vec3 floor_point(const Vec3& p) { return {p.x, 0.0, p.z}; }

Pose metric_floor_pose(const Pose& est, double scale) {
    return {Vec3{est.position.x * scale, 0.0, est.position.z * scale}, est.yaw, est.pitch};
}

double successful_path_lower_bound(double field_at_start, double refined_cell,
                                   double stop_radius) {
    if (!std::isfinite(field_at_start)) return field_at_start;
    return std::max(0.0, (field_at_start - 3.0 * refined_cell) / kOctileOverrun - stop_radius);
}

// Rigid planar alignment taking bank-frame data into the live frame, pinned
// at the relocalized camera position.
struct FrameAlign {
    double dyaw = 0.0;  // bank-frame yaw minus live-frame yaw
    Vec3 c_bank;
    Vec3 c_live;

    bool near_identity() const {
        return std::abs(dyaw) < 1e-9 && distance(c_bank, c_live) < 1e-9;
    }
    Vec3 map(const Vec3& p) const {
        const double c = std::cos(dyaw);
        const double s = std::sin(dyaw);
        const double x = p.x - c_bank.x;
        const double z = p.z - c_bank.z;
        return {x * c - z * s + c_live.x, p.y - c_bank.y + c_live.y, x * s + z * c + c_live.z};
    }
};

// Skipped when the frames already coincide so a bank replayed in place stays
// bit-identical.
void align_bank(MemoryBank& bank, const FrameAlign& a) {
    if (a.near_identity()) return;
    for (Keyframe& kf : bank.keyframes) {
        kf.pose.position = a.map(kf.pose.position);
        kf.pose.yaw = wrap_angle(kf.pose.yaw - a.dyaw);
        for (Vec3& p : kf.cloud.points) p = a.map(p);
    }
}

void validate_start(const World& world, const Vec3& start, const char* who) {
    const GridCell c = world.cell_of(start);
    if (!world.in_bounds(c.row, c.col) || world.blocked(c.row, c.col))
        throw std::invalid_argument(std::string(who) + ": start is not on free space");
}

}  // namespace

const char* status_name(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::success: return "success";
        case EpisodeStatus::stop_miss: return "stop_miss";
        case EpisodeStatus::step_limit: return "step_limit";
        case EpisodeStatus::explored_out: return "explored_out";
    }
    return "unknown";
}

ObjectStore fuse_bank(const MemoryBank& bank, const FusionParams& fusion) {
    ObjectStore store;
    if (bank.empty()) return store;
    if (!bank.scale_known) throw std::runtime_error("fuse_bank: metric scale unknown");
    const AssociationParams assoc = AssociationParams::from(fusion);
    for (const Keyframe& kf : bank.keyframes) {
        Observation view;
        view.cloud = kf.cloud;
        view.estimated_pose = kf.pose;
        view.frame_id = kf.id;
        for (const Detection& det : kf.detections) {
            const PointCloud pts = filter_confident_points(view, det, bank.metric_scale.scale,
                                                           fusion.confidence_threshold);
            store.ingest(pts, det.feature, det.category, assoc);
        }
    }
    return store;
}

EpisodeResult run_episode(const World& world, const EpisodeSpec& spec, const Config& config) {
    if (spec.max_steps < 1)
        throw std::invalid_argument("run_episode: max_steps must be at least 1");
    validate_start(world, spec.start, "run_episode");
    if (!spec.goal_category.empty() && find_category(spec.goal_category) == nullptr)
        throw std::invalid_argument("run_episode: unknown goal category '" +
                                    spec.goal_category + "'");

    const WorldParams& wp = config.world;
    const MapParams& mp = config.maps;
    const FusionParams& fp = config.fusion;
    const HighPlannerParams& hp = config.planner_high;
    const LowPlannerParams& lp = config.planner_low;
    const EpisodeParams& ep = config.episode;

    EpisodeResult result;
    const bool has_goal = !spec.goal_category.empty();
    GeodesicField oracle;
    if (has_goal) {
        oracle = object_distance_field(world, spec.goal_category);
        result.shortest_length =
            successful_path_lower_bound(oracle.at(spec.start), oracle.cell, lp.stop_radius);
    }

    Pose true_pose = camera_pose(world, spec.start, spec.start_yaw);
    DriftState drift = make_drift_state(world.seed, spec.seed);
    const PerceptionFrame frame{true_pose.position};

    MemoryBank bank;
    bool context_loaded = false;
    if (!spec.context_bank_path.empty()) {
        bank = load_bank(spec.context_bank_path);
        context_loaded = true;
        result.context_used = true;
    }

    ObjectStore store;
    GridSpec map_spec{mp.cell_size, Vec3{}, 0, 0, 0, 0};
    GridMaps maps;
    bool have_maps = false;
    std::vector<Vec3> visited;  // estimated floor positions, perception units
    Blacklist blacklist;
    std::optional<Waypoint> current;
    PlannedPath path;
    std::size_t fused_keyframes = 0;
    double fused_scale = 0.0;
    int steps_since_plan = 0;
    int collision_streak = 0;
    // until the scale locks the agent looks down once and spins in place,
    // which sweeps the floor through view and anchors the height fit
    const double scan_pitch = -ep.turn_deg * M_PI / 180.0 + 1e-9;
    // then a level panorama, so the first plan sees the whole surround
    // instead of giving up on a map the width of one glance
    int pan_remaining = static_cast<int>(std::ceil(360.0 / ep.turn_deg));

    // scored without inflation: object targets hug their object's cells, so a
    // dilated field would call every one of them unreachable
    auto scoring_field = [&](const MapCell& cell) -> DistanceField {
        try {
            return fmm_solve(maps, {cell}, 0, lp);
        } catch (const std::runtime_error&) {
            return fmm_solve(maps, {cell}, 0, lp, {cell});
        }
    };


    auto try_replan = [&](int step, const MapCell& agent_cell) -> bool {
        steps_since_plan = 0;
        collision_streak = 0;
        current.reset();
        path = PlannedPath{};
        maps.value = build_value_map(bank, maps.spec, fp.confidence_threshold);
        const auto frontiers = detect_frontiers(maps, mp.min_frontier_size);
        const auto goals = has_goal
                               ? query_goal_objects(store.objects, spec.goal_category, 0.0)
                               : std::vector<SemanticObject>{};
        const auto cands = candidate_waypoints(maps, goals, frontiers);
        if (cands.empty()) return false;
        const DistanceField from_agent = scoring_field(agent_cell);
        std::vector<double> scores;
        scores.reserve(cands.size());
        for (const Waypoint& w : cands)
            scores.push_back(score_waypoint(w, maps, goals, frontiers, from_agent, hp));
        for (std::size_t attempt = 0; attempt <= cands.size(); ++attempt) {
            const auto sel =
                select_waypoint(cands, scores, goals, blacklist, from_agent, step, hp);
            if (!sel) return false;
            bool planned = false;
            // object targets sit inside their own inflation ring, so retry
            // with a shrinking disc before giving up on the waypoint
            for (int infl = lp.inflation_cells; infl >= 0 && !planned; --infl) {
                DistanceField to_target;
                try {
                    to_target = fmm_solve(maps, {sel->target_cell}, infl, lp, {agent_cell});
                } catch (const std::runtime_error&) {
                    continue;
                }
                try {
                    path = extract_path(to_target, agent_cell);
                    planned = true;
                } catch (const std::runtime_error&) {
                }
            }
            if (planned) {
                current = sel;
                if (kTrace)
                    std::fprintf(stderr,
                                 "[%3d] plan %s src=%d cell=(%d,%d) score=%.3f agent=(%d,%d) "
                                 "len=%.2f\n",
                                 step, sel->kind == WaypointKind::object_goal ? "obj" : "fro",
                                 sel->source_id, sel->target_cell.cx, sel->target_cell.cz,
                                 sel->score, agent_cell.cx, agent_cell.cz, path.length);
                return true;
            }
            report_unreachable(blacklist, *sel, step, hp);
            if (kTrace)
                std::fprintf(stderr, "[%3d] unreachable %s src=%d cell=(%d,%d)\n", step,
                             sel->kind == WaypointKind::object_goal ? "obj" : "fro",
                             sel->source_id, sel->target_cell.cx, sel->target_cell.cz);
        }
        return false;
    };

    EpisodeStatus final_status = EpisodeStatus::step_limit;
    for (int step = 0; step < spec.max_steps; ++step) {
        Observation obs = observe(world, true_pose, drift, frame, step, wp);

        if (step == 0 && context_loaded && !bank.empty()) {
            const RelocResult reloc = relocalize(bank, obs, config.memory);
            if (reloc.ok) {
                result.reloc_ok = true;
                pan_remaining = 0;  // the tour already covered the surround
                align_bank(bank, FrameAlign{wrap_angle(reloc.pose.yaw - obs.estimated_pose.yaw),
                                            reloc.pose.position, obs.estimated_pose.position});
            } else {
                bank = MemoryBank{};  // unplaceable prior; explore from scratch
            }
        }

        const bool inserted =
            maybe_insert_keyframe(bank, obs, obs.estimated_pose, config.memory, config.scale)
                .has_value();
        if (inserted || (step == 0 && !bank.empty())) {
            if (has_goal) {
                score_keyframes(bank, spec.goal_category);
            } else {
                for (Keyframe& kf : bank.keyframes)
                    if (!kf.scored) {
                        kf.value_score = 0.05;
                        kf.scored = true;
                    }
            }
        }

        const double scale = bank.scale_or_unit();
        visited.push_back(floor_point(obs.estimated_pose.position));
        result.trajectory.push_back(metric_floor_pose(obs.estimated_pose, scale));

        if (bank.scale_known) {
            if (bank.keyframes.size() != fused_keyframes ||
                bank.metric_scale.scale != fused_scale) {
                store = fuse_bank(bank, fp);
                fused_keyframes = bank.keyframes.size();
                fused_scale = bank.metric_scale.scale;
            }
            maps = project_maps(bank, store, map_spec, mp.height_min, mp.height_max);
            map_spec = maps.spec;
            for (const Vec3& v : visited) {
                ensure_covers(maps, v * scale);
                mark_traversed(maps, v * scale);
            }
            map_spec = maps.spec;
            have_maps = true;
        }

        const Pose est_metric = metric_floor_pose(obs.estimated_pose, scale);

        if (have_maps && has_goal) {
            const auto confident =
                query_goal_objects(store.objects, spec.goal_category, hp.theta_obj);
            if (!confident.empty() &&
                check_stop(maps, est_metric, confident, ep.stop_margin * lp.stop_radius,
                           hp.theta_obj, lp)) {
                true_pose = step_dynamics(world, true_pose, Action::stop, ep).pose;
                result.actions.push_back(Action::stop);
                ++result.steps;
                final_status = oracle.at(floor_point(true_pose.position)) <= lp.stop_radius
                                   ? EpisodeStatus::success
                                   : EpisodeStatus::stop_miss;
                break;
            }
        }

        Action action;
        if (!bank.scale_known) {
            action = true_pose.pitch > scan_pitch ? Action::look_down : Action::turn_left;
        } else if (est_metric.pitch < -1e-9) {
            action = Action::look_up;  // level off so the pan reaches full range
        } else if (pan_remaining > 0) {
            --pan_remaining;
            action = Action::turn_left;
        } else {
            const MapCell agent_cell = world_to_cell(maps.spec, est_metric.position);
            bool replan = !current.has_value() || steps_since_plan >= hp.replan_period;
            if (current.has_value()) {
                if (std::max(std::abs(agent_cell.cx - current->target_cell.cx),
                             std::abs(agent_cell.cz - current->target_cell.cz)) <=
                    hp.reached_cells) {
                    // arrived without tripping the stop check; a target that
                    // yields no progress up close is a dead end (occlusion
                    // shadows leave permanent frontiers behind furniture)
                    report_unreachable(blacklist, *current, step, hp);
                    if (kTrace)
                        std::fprintf(stderr, "[%3d] arrived %s src=%d without stop\n", step,
                                     current->kind == WaypointKind::object_goal ? "obj"
                                                                                : "fro",
                                     current->source_id);
                    replan = true;
                } else if (blacklisted(blacklist, *current, step, hp)) {
                    replan = true;
                } else if (current->kind == WaypointKind::object_goal) {
                    const auto goals =
                        query_goal_objects(store.objects, spec.goal_category, 0.0);
                    replan = replan ||
                             std::none_of(goals.begin(), goals.end(), [&](const auto& o) {
                                 return o.id == current->source_id;
                             });
                } else if (maps.obstacle_at(current->target_cell) == CellState::obstacle) {
                    replan = true;  // the map reclassified the cell under it
                }
            }
            if (replan && !try_replan(step, agent_cell)) {
                final_status = EpisodeStatus::explored_out;
                break;
            }
            action = next_action(path, maps, est_metric, lp);
        }

        const StepOutcome out = step_dynamics(world, true_pose, action, ep);
        if (out.collided) {
            ++result.collisions;
            if (current && ++collision_streak >= hp.unreachable_collisions) {
                report_unreachable(blacklist, *current, step, hp);
                current.reset();
                collision_streak = 0;
            }
        } else if (action == Action::move_forward) {
            collision_streak = 0;
        }
        result.path_length += distance(out.pose.position, true_pose.position);
        true_pose = out.pose;
        advance_drift(drift, wp);
        result.actions.push_back(action);
        ++result.steps;
        ++steps_since_plan;
    }

    result.status = final_status;
    result.success = final_status == EpisodeStatus::success;
    result.dtg = has_goal ? oracle.at(floor_point(true_pose.position)) : 0.0;
    if (have_maps) {
        maps.value = build_value_map(bank, maps.spec, fp.confidence_threshold);
        result.maps = std::move(maps);
    }
    result.store = std::move(store);
    return result;
}

double spl_term(const EpisodeResult& r) {
    if (!r.success) return 0.0;
    if (r.shortest_length <= 0.0) return 1.0;  // started inside the goal radius
    return r.shortest_length / std::max(r.path_length, r.shortest_length);
}

MetricsSummary compute_metrics(const std::vector<EpisodeResult>& results) {
    if (results.empty()) throw std::invalid_argument("compute_metrics: empty result set");
    MetricsSummary m;
    for (const EpisodeResult& r : results) {
        m.sr += r.success ? 1.0 : 0.0;
        m.spl += spl_term(r);
        m.mean_dtg += r.dtg;
        m.mean_steps += r.steps;
    }
    const double n = static_cast<double>(results.size());
    m.sr /= n;
    m.spl /= n;
    m.mean_dtg /= n;
    m.mean_steps /= n;
    return m;
}

MemoryBank record_context_video(const World& world, const Vec3& start, double start_yaw,
                                const std::vector<Action>& actions, uint64_t seed,
                                const Config& config, const std::string& out_path) {
    validate_start(world, start, "record_context_video");
    Pose pose = camera_pose(world, start, start_yaw);
    DriftState drift = make_drift_state(world.seed, seed);
    const PerceptionFrame frame{pose.position};
    std::vector<Observation> frames;
    const int n = static_cast<int>(actions.size());
    frames.reserve(static_cast<std::size_t>(std::max(n, 1)));
    for (int k = 0; k < std::max(n, 1); ++k) {
        frames.push_back(observe(world, pose, drift, frame, k, config.world));
        if (k >= n) break;
        const StepOutcome out = step_dynamics(world, pose, actions[k], config.episode);
        if (out.collided)
            throw std::invalid_argument("record_context_video: action " + std::to_string(k) +
                                        " collides with the map");
        pose = out.pose;
        advance_drift(drift, config.world);
    }
    MemoryBank bank;
    ingest_context_video(bank, frames, config.memory, config.scale);
    bank.has_endpoint = true;
    bank.endpoint_pose = Pose{floor_point(pose.position), pose.yaw, pose.pitch};
    save_bank(bank, out_path);
    return bank;
}

void render_episode(const EpisodeResult& result, const std::string& out_dir) {
    if (result.maps.spec.width <= 0 || result.maps.spec.height <= 0)
        throw std::invalid_argument("render_episode: episode produced no map");
    std::filesystem::create_directories(out_dir);
    const auto frontiers = detect_frontiers(result.maps);
    std::vector<Vec3> traj;
    traj.reserve(result.trajectory.size());
    for (const Pose& p : result.trajectory) traj.push_back(p.position);
    write_composite_ppm(result.maps, frontiers, traj, out_dir + "/composite.ppm");
    write_value_pgm(result.maps, out_dir + "/value.pgm");
    write_obstacle_pgm(result.maps, out_dir + "/obstacle.pgm");
    write_explored_pgm(result.maps, out_dir + "/explored.pgm");
}

}  // namespace semnav
