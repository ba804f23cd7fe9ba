#include "semnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace semnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
constexpr double kSurfaceNudge = 1e-4;  // meters past the hit, stabilizes cell binning

double deg2rad(double d) { return d * kPi / 180.0; }

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

GridCell World::cell_of(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.z / cell_size)),
            static_cast<int>(std::floor(p.x / cell_size))};
}

Vec3 World::cell_center(const GridCell& cell) const {
    return {(cell.col + 0.5) * cell_size, 0.0, (cell.row + 0.5) * cell_size};
}

int World::object_at(int row, int col) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
        for (const GridCell& c : objects[i].cells)
            if (c.row == row && c.col == col) return static_cast<int>(i);
    return -1;
}

void validate_world(const World& world) {
    auto fail = [](const std::string& rule) {
        throw std::runtime_error("world validation failed: " + rule);
    };
    if (!(world.cell_size > 0.0)) fail("cell_size must be positive");
    if (world.rows() < 3 || world.cols() < 3) fail("grid must be at least 3x3");
    for (const std::string& row : world.grid) {
        if (static_cast<int>(row.size()) != world.cols())
            fail("grid rows must have equal length");
        for (char c : row)
            if (c != '#' && c != '.') fail("grid may contain only '#' and '.'");
    }
    for (int c = 0; c < world.cols(); ++c)
        if (world.grid[0][c] != '#' || world.grid[world.rows() - 1][c] != '#')
            fail("grid boundary must be wall");
    for (int r = 0; r < world.rows(); ++r)
        if (world.grid[r][0] != '#' || world.grid[r][world.cols() - 1] != '#')
            fail("grid boundary must be wall");
    if (world.scale_factor < 0.2 || world.scale_factor > 5.0)
        fail("scale_factor must lie in [0.2, 5.0]");
    if (!(world.camera_height > 0.0)) fail("camera_height must be positive");
    for (const WorldObject& obj : world.objects) {
        if (obj.category.empty()) fail("object category must be non-empty");
        if (obj.cells.empty()) fail("object footprint must be non-empty");
        if (!(obj.height > 0.0)) fail("object height must be positive");
        for (const GridCell& c : obj.cells) {
            if (!world.in_bounds(c.row, c.col)) fail("object footprint out of bounds");
            if (world.grid[c.row][c.col] != '.')
                fail("object footprint must lie on free cells");
        }
    }
}

World load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_world: cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_world: " + path + ": " + e.what());
    }
    World w;
    try {
        w.cell_size = j.at("cell_size").get<double>();
        w.grid = j.at("grid").get<std::vector<std::string>>();
        w.camera_height = j.at("camera_height").get<double>();
        w.scale_factor = j.at("scale_factor").get<double>();
        w.seed = j.at("seed").get<uint64_t>();
        for (const auto& jo : j.at("objects")) {
            WorldObject obj;
            obj.category = jo.at("category").get<std::string>();
            obj.height = jo.at("height").get<double>();
            for (const auto& jc : jo.at("cells")) {
                if (!jc.is_array() || jc.size() != 2)
                    throw std::runtime_error("load_world: object cell must be [row, col]");
                obj.cells.push_back({jc[0].get<int>(), jc[1].get<int>()});
            }
            w.objects.push_back(std::move(obj));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_world: " + path + ": bad field: " + e.what());
    }
    validate_world(w);
    return w;
}

void save_world(const World& world, const std::string& path) {
    nlohmann::json j;
    j["cell_size"] = world.cell_size;
    j["grid"] = world.grid;
    j["camera_height"] = world.camera_height;
    j["scale_factor"] = world.scale_factor;
    j["seed"] = world.seed;
    j["objects"] = nlohmann::json::array();
    for (const WorldObject& obj : world.objects) {
        nlohmann::json jo;
        jo["category"] = obj.category;
        jo["height"] = obj.height;
        jo["cells"] = nlohmann::json::array();
        for (const GridCell& c : obj.cells) jo["cells"].push_back({c.row, c.col});
        j["objects"].push_back(std::move(jo));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_world: cannot write " + path);
    out << j.dump(2) << "\n";
}

// ---- categories ------------------------------------------------------------

const std::vector<CategorySpec>& standard_categories() {
    static const std::vector<CategorySpec> cats = {
        {"chair", 1, 1, 0.9},  {"bed", 3, 2, 0.65},       {"plant", 1, 1, 1.2},
        {"toilet", 1, 1, 0.8}, {"tv_monitor", 1, 1, 1.1}, {"sofa", 3, 1, 0.85},
    };
    return cats;
}

const CategorySpec* find_category(const std::string& name) {
    for (const CategorySpec& c : standard_categories())
        if (c.name == name) return &c;
    return nullptr;
}

FeatureVec category_embedding(const std::string& name, int dim) {
    SplitMix64 rng(mix_seed(fnv1a(name), 0x7f4a7c15ULL));
    FeatureVec f;
    f.values.resize(dim);
    for (int i = 0; i < dim; ++i) f.values[i] = rng.gaussian();
    double n = f.norm();
    if (n == 0.0) {  // astronomically unlikely; keep the function total
        f.values[0] = 1.0;
        n = 1.0;
    }
    for (double& v : f.values) v /= n;
    return f;
}

// ---- world generation ------------------------------------------------------

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

}  // namespace

World generate_world(uint64_t seed, int n_rooms,
                     const std::vector<std::string>& categories) {
    if (n_rooms < 1) throw std::invalid_argument("generate_world: n_rooms must be >= 1");
    const std::vector<std::string>& cats = [&]() -> const std::vector<std::string>& {
        static thread_local std::vector<std::string> all;
        if (!categories.empty()) return categories;
        all.clear();
        for (const CategorySpec& c : standard_categories()) all.push_back(c.name);
        return all;
    }();

    SplitMix64 rng(mix_seed(seed, 0x5eedf00dULL, static_cast<uint64_t>(n_rooms)));
    const int rx = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_rooms))));
    const int ry = (n_rooms + rx - 1) / rx;
    const int rw = rng.range(11, 15);  // room interior, cells
    const int rh = rng.range(11, 15);
    const int door = 7;  // cells, 1.75 m openings

    World w;
    w.cell_size = 0.25;
    w.camera_height = 0.88;
    w.seed = seed;
    w.scale_factor = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
    const int rows = ry * (rh + 1) + 1;
    const int cols = rx * (rw + 1) + 1;
    w.grid.assign(rows, std::string(cols, '#'));

    auto room_row0 = [&](int ri) { return 1 + ri * (rh + 1); };
    auto room_col0 = [&](int ci) { return 1 + ci * (rw + 1); };
    auto active = [&](int ri, int ci) { return ri * rx + ci < n_rooms; };

    for (int ri = 0; ri < ry; ++ri)
        for (int ci = 0; ci < rx; ++ci) {
            if (!active(ri, ci)) continue;
            for (int r = room_row0(ri); r < room_row0(ri) + rh; ++r)
                for (int c = room_col0(ci); c < room_col0(ci) + rw; ++c)
                    w.grid[r][c] = '.';
        }

    // doors along a random spanning tree over active rooms, plus some loops
    struct Edge {
        int a, b;      // room indices, row-major
        bool horizontal;  // shared wall is vertical (rooms side by side)
    };
    std::vector<Edge> edges;
    for (int ri = 0; ri < ry; ++ri)
        for (int ci = 0; ci < rx; ++ci) {
            if (!active(ri, ci)) continue;
            if (ci + 1 < rx && active(ri, ci + 1))
                edges.push_back({ri * rx + ci, ri * rx + ci + 1, true});
            if (ri + 1 < ry && active(ri + 1, ci))
                edges.push_back({ri * rx + ci, (ri + 1) * rx + ci, false});
        }
    for (std::size_t i = edges.size(); i > 1; --i)
        std::swap(edges[i - 1], edges[rng.bounded(i)]);

    UnionFind uf(rx * ry);
    for (const Edge& e : edges) {
        const bool tree = uf.unite(e.a, e.b);
        if (!tree && rng.uniform() >= 0.35) continue;
        const int ri = e.a / rx, ci = e.a % rx;
        if (e.horizontal) {
            const int wall_col = room_col0(ci) + rw;
            const int r0 = room_row0(ri) + rng.range(0, rh - door);
            for (int r = r0; r < r0 + door; ++r) w.grid[r][wall_col] = '.';
        } else {
            const int wall_row = room_row0(ri) + rh;
            const int c0 = room_col0(ci) + rng.range(0, rw - door);
            for (int c = c0; c < c0 + door; ++c) w.grid[wall_row][c] = '.';
        }
    }

    // objects: one or two instances per category, margin one cell from
    // room walls and from each other
    auto occupied = [&](int r, int c) {
        for (const WorldObject& o : w.objects)
            for (const GridCell& cell : o.cells)
                if (std::abs(cell.row - r) <= 1 && std::abs(cell.col - c) <= 1) return true;
        return false;
    };
    for (const std::string& name : cats) {
        const CategorySpec* spec = find_category(name);
        if (!spec) throw std::invalid_argument("generate_world: unknown category " + name);
        const int instances = 1 + static_cast<int>(rng.bounded(2));
        for (int inst = 0; inst < instances; ++inst) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const int room = static_cast<int>(rng.bounded(static_cast<uint64_t>(n_rooms)));
                const int ri = room / rx, ci = room % rx;
                int fr = spec->footprint_rows, fc = spec->footprint_cols;
                if (rng.bounded(2)) std::swap(fr, fc);
                if (fr > rh - 2 || fc > rw - 2) continue;
                const int r0 = room_row0(ri) + 1 + rng.range(0, rh - 2 - fr);
                const int c0 = room_col0(ci) + 1 + rng.range(0, rw - 2 - fc);
                bool ok = true;
                for (int r = r0; r < r0 + fr && ok; ++r)
                    for (int c = c0; c < c0 + fc && ok; ++c)
                        if (occupied(r, c)) ok = false;
                if (!ok) continue;
                WorldObject obj;
                obj.category = name;
                obj.height = spec->height;
                for (int r = r0; r < r0 + fr; ++r)
                    for (int c = c0; c < c0 + fc; ++c) obj.cells.push_back({r, c});
                w.objects.push_back(std::move(obj));
                placed = true;
            }
            if (!placed && inst == 0)
                throw std::runtime_error("generate_world: could not place category " + name);
        }
    }

    validate_world(w);
    return w;
}

// ---- dynamics ---------------------------------------------------------------

const char* action_name(Action a) {
    switch (a) {
        case Action::move_forward: return "move_forward";
        case Action::turn_left: return "turn_left";
        case Action::turn_right: return "turn_right";
        case Action::look_up: return "look_up";
        case Action::look_down: return "look_down";
        case Action::stop: return "stop";
    }
    return "?";
}

namespace {

// visits every cell the planar segment [a, b] passes through
template <typename Fn>
void walk_segment_cells(const World& w, const Vec3& a, const Vec3& b, Fn&& fn) {
    const double cs = w.cell_size;
    int col = static_cast<int>(std::floor(a.x / cs));
    int row = static_cast<int>(std::floor(a.z / cs));
    const int col_end = static_cast<int>(std::floor(b.x / cs));
    const int row_end = static_cast<int>(std::floor(b.z / cs));
    const double dx = b.x - a.x, dz = b.z - a.z;
    const int step_c = dx > 0 ? 1 : -1;
    const int step_r = dz > 0 ? 1 : -1;
    double tx = dx != 0.0 ? ((col + (dx > 0 ? 1 : 0)) * cs - a.x) / dx : kInf;
    double tz = dz != 0.0 ? ((row + (dz > 0 ? 1 : 0)) * cs - a.z) / dz : kInf;
    const double tdx = dx != 0.0 ? cs / std::abs(dx) : kInf;
    const double tdz = dz != 0.0 ? cs / std::abs(dz) : kInf;
    fn(row, col);
    int guard = 4 * (w.rows() + w.cols());
    while ((row != row_end || col != col_end) && guard-- > 0) {
        if (tx <= tz) {
            col += step_c;
            tx += tdx;
        } else {
            row += step_r;
            tz += tdz;
        }
        fn(row, col);
    }
}

}  // namespace

StepOutcome step_dynamics(const World& world, const Pose& pose, Action action,
                          const EpisodeParams& params) {
    StepOutcome out{pose, false};
    const double turn = deg2rad(params.turn_deg);
    switch (action) {
        case Action::turn_left:
            out.pose.yaw = wrap_angle(pose.yaw + turn);
            return out;
        case Action::turn_right:
            out.pose.yaw = wrap_angle(pose.yaw - turn);
            return out;
        case Action::look_up:
            out.pose.pitch = std::clamp(pose.pitch + turn, -kPi / 3.0, kPi / 3.0);
            return out;
        case Action::look_down:
            out.pose.pitch = std::clamp(pose.pitch - turn, -kPi / 3.0, kPi / 3.0);
            return out;
        case Action::stop:
            return out;
        case Action::move_forward:
            break;
    }
    const Vec3 target = pose.position + pose.forward() * params.forward_step;
    bool blocked = false;
    walk_segment_cells(world, pose.position, target, [&](int r, int c) {
        if (world.is_wall(r, c) || world.object_at(r, c) >= 0) blocked = true;
    });
    if (blocked) {
        out.collided = true;
    } else {
        out.pose.position = target;
    }
    return out;
}

// ---- drift ------------------------------------------------------------------

DriftState make_drift_state(uint64_t world_seed, uint64_t episode_seed) {
    DriftState d;
    d.rng = SplitMix64(mix_seed(world_seed, episode_seed, 0xd21f7ULL));
    return d;
}

void advance_drift(DriftState& drift, const WorldParams& params) {
    const double pull = params.drift_pullback;
    drift.offset.x = pull * drift.offset.x + drift.rng.gaussian() * params.drift_position_std;
    drift.offset.z = pull * drift.offset.z + drift.rng.gaussian() * params.drift_position_std;
    drift.yaw_offset =
        pull * drift.yaw_offset + drift.rng.gaussian() * deg2rad(params.drift_yaw_std_deg);
}

// ---- perception oracle -------------------------------------------------------

Pose camera_pose(const World& world, const Vec3& floor_position, double yaw, double pitch) {
    return make_pose({floor_position.x, world.camera_height, floor_position.z}, yaw, pitch);
}

namespace {

struct RayHit {
    bool hit = false;
    double t = 0.0;
    double cos_incidence = 1.0;
    int object = -1;  // -1: wall or floor
};

RayHit cast_ray(const World& w, const Vec3& origin, const Vec3& dir, double max_range) {
    RayHit best;
    const double cs = w.cell_size;
    int col = static_cast<int>(std::floor(origin.x / cs));
    int row = static_cast<int>(std::floor(origin.z / cs));
    const int step_c = dir.x > 0 ? 1 : -1;
    const int step_r = dir.z > 0 ? 1 : -1;
    double tx = dir.x != 0.0 ? ((col + (dir.x > 0 ? 1 : 0)) * cs - origin.x) / dir.x : kInf;
    double tz = dir.z != 0.0 ? ((row + (dir.z > 0 ? 1 : 0)) * cs - origin.z) / dir.z : kInf;
    const double tdx = dir.x != 0.0 ? cs / std::abs(dir.x) : kInf;
    const double tdz = dir.z != 0.0 ? cs / std::abs(dir.z) : kInf;

    double t_enter = 0.0;
    double enter_cos = 1.0;  // |dir component along the entry face normal|
    int guard = 4 * (w.rows() + w.cols()) + 8;
    while (guard-- > 0) {
        const double t_exit = std::min(std::min(tx, tz), max_range);
        if (t_enter >= max_range) break;
        const double y_enter = origin.y + dir.y * t_enter;

        if (w.is_wall(row, col)) {
            if (t_enter > 0.0 && y_enter >= 0.0 && y_enter <= kWallHeight) {
                best = {true, t_enter, enter_cos, -1};
                return best;
            }
            // started inside or passed above the wall top: no hit in this cell
        } else {
            const int obj = w.object_at(row, col);
            if (obj >= 0) {
                const double h = w.objects[obj].height;
                if (t_enter > 0.0 && y_enter >= 0.0 && y_enter <= h) {
                    return {true, t_enter, enter_cos, obj};
                }
                if (dir.y < 0.0 && y_enter > h) {  // descending onto the top face
                    const double t_top = (h - origin.y) / dir.y;
                    if (t_top > t_enter && t_top <= t_exit && t_top <= max_range)
                        return {true, t_top, std::abs(dir.y), obj};
                }
            }
            if (dir.y < 0.0) {  // floor
                const double t_floor = -origin.y / dir.y;
                if (t_floor > t_enter && t_floor <= t_exit && t_floor <= max_range)
                    return {true, t_floor, std::abs(dir.y), -1};
            }
        }

        if (t_exit >= max_range) break;
        if (tx <= tz) {
            col += step_c;
            t_enter = tx;
            tx += tdx;
            enter_cos = std::abs(dir.x);
        } else {
            row += step_r;
            t_enter = tz;
            tz += tdz;
            enter_cos = std::abs(dir.z);
        }
        if (!w.in_bounds(row, col)) break;
    }
    return best;
}

Vec3 rotate_to_world(const Vec3& v, double yaw, double pitch) {
    Pose p;
    p.yaw = yaw;
    p.pitch = pitch;
    return transform_point(v, p);  // zero translation
}

}  // namespace

Observation observe(const World& world, const Pose& true_camera_pose,
                    const DriftState& drift, const PerceptionFrame& frame, int frame_id,
                    const WorldParams& params) {
    const GridCell cell = world.cell_of(true_camera_pose.position);
    if (world.is_wall(cell.row, cell.col) || world.object_at(cell.row, cell.col) >= 0)
        throw std::runtime_error("observe: pose off free space");

    const double sigma = world.scale_factor;
    Observation obs;
    obs.frame_id = frame_id;

    Pose est;
    est.position = (true_camera_pose.position - frame.origin) * (1.0 / sigma) +
                   drift.offset * (1.0 / sigma);
    est.yaw = wrap_angle(true_camera_pose.yaw + drift.yaw_offset);
    est.pitch = true_camera_pose.pitch;
    obs.estimated_pose = est;

    const double fov_h = deg2rad(params.fov_h_deg);
    const double fov_v = deg2rad(params.fov_v_deg);
    const double col_width = fov_h / params.rays_x;
    const double row_width = fov_v / params.rays_y;

    struct ObjHits {
        std::vector<int> indices;
        double a_min = kInf, a_max = -kInf, b_min = kInf, b_max = -kInf;
    };
    std::vector<ObjHits> per_object(world.objects.size());

    PointCloud cam_cloud;
    for (int i = 0; i < params.rays_y; ++i) {
        const double beta = -fov_v / 2 + (i + 0.5) * row_width;
        for (int j = 0; j < params.rays_x; ++j) {
            const double alpha = -fov_h / 2 + (j + 0.5) * col_width;
            const Vec3 dir_cam{std::cos(beta) * std::cos(alpha), std::sin(beta),
                               -std::cos(beta) * std::sin(alpha)};
            const Vec3 dir = rotate_to_world(dir_cam, true_camera_pose.yaw,
                                             true_camera_pose.pitch);
            const RayHit hit =
                cast_ray(world, true_camera_pose.position, dir, params.max_range);
            if (!hit.hit) continue;
            const double q = (1.0 - hit.t / params.max_range) *
                             (0.3 + 0.7 * hit.cos_incidence);
            const double q_quant = std::round(std::clamp(q, 0.0, 1.0) * 1024.0) / 1024.0;
            const int index = static_cast<int>(cam_cloud.size());
            cam_cloud.push_back(dir_cam * (hit.t + kSurfaceNudge),
                                1.0 + params.confidence_gain * q_quant);
            if (hit.object >= 0) {
                ObjHits& oh = per_object[hit.object];
                oh.indices.push_back(index);
                oh.a_min = std::min(oh.a_min, alpha);
                oh.a_max = std::max(oh.a_max, alpha);
                oh.b_min = std::min(oh.b_min, beta);
                oh.b_max = std::max(oh.b_max, beta);
            }
        }
    }

    obs.cloud = transform_cloud(scale_cloud(cam_cloud, 1.0 / sigma), est);

    const double min_subtend = deg2rad(params.min_subtend_deg);
    for (std::size_t oi = 0; oi < per_object.size(); ++oi) {
        const ObjHits& oh = per_object[oi];
        if (oh.indices.empty()) continue;
        const double span_h = oh.a_max - oh.a_min + col_width;
        const double span_v = oh.b_max - oh.b_min + row_width;
        if (std::max(span_h, span_v) < min_subtend) continue;

        SplitMix64 det_rng(mix_seed(world.seed, static_cast<uint64_t>(frame_id),
                                    static_cast<uint64_t>(oi)));
        Detection det;
        det.category = world.objects[oi].category;
        det.point_indices = oh.indices;
        det.detector_confidence =
            std::min(1.0, 0.6 + 0.35 * std::min(1.0, oh.indices.size() / 30.0) +
                              0.05 * det_rng.uniform());
        FeatureVec f = category_embedding(det.category, params.feature_dim);
        for (double& v : f.values) v += det_rng.gaussian() * params.feature_noise_std;
        const double n = f.norm();
        if (n > 0.0)
            for (double& v : f.values) v /= n;
        det.feature = std::move(f);
        obs.detections.push_back(std::move(det));
    }

    if (params.false_positives && !obs.cloud.empty()) {
        SplitMix64 fp_rng(mix_seed(world.seed, static_cast<uint64_t>(frame_id), 0xfa15eULL));
        if (fp_rng.uniform() < 0.05) {
            const auto& cats = standard_categories();
            Detection det;
            det.category = cats[fp_rng.bounded(cats.size())].name;
            const int n_pts = 1 + static_cast<int>(fp_rng.bounded(5));
            for (int k = 0; k < n_pts; ++k)
                det.point_indices.push_back(
                    static_cast<int>(fp_rng.bounded(obs.cloud.size())));
            std::sort(det.point_indices.begin(), det.point_indices.end());
            det.point_indices.erase(
                std::unique(det.point_indices.begin(), det.point_indices.end()),
                det.point_indices.end());
            det.detector_confidence = 0.3 + 0.2 * fp_rng.uniform();
            FeatureVec f = category_embedding(det.category, params.feature_dim);
            for (double& v : f.values) v += fp_rng.gaussian() * 4.0 * params.feature_noise_std;
            const double n = f.norm();
            if (n > 0.0)
                for (double& v : f.values) v /= n;
            det.feature = std::move(f);
            obs.detections.push_back(std::move(det));
        }
    }

    return obs;
}

// ---- evaluation oracles -------------------------------------------------------

namespace {

// 8-connected Dijkstra with no diagonal corner cutting; returns meters
std::vector<double> grid_dijkstra(int rows, int cols, double cell,
                                  const std::vector<char>& free,
                                  const std::vector<int>& sources) {
    std::vector<double> dist(static_cast<std::size_t>(rows) * cols, kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int s : sources) {
        if (!free[s]) continue;
        if (dist[s] > 0.0) {
            dist[s] = 0.0;
            pq.push({0.0, s});
        }
    }
    const double diag = cell * std::sqrt(2.0);
    while (!pq.empty()) {
        auto [d, idx] = pq.top();
        pq.pop();
        if (d > dist[idx]) continue;
        const int r = idx / cols, c = idx % cols;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const int nr = r + dr, nc = c + dc;
                if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                const int nidx = nr * cols + nc;
                if (!free[nidx]) continue;
                if (dr != 0 && dc != 0 &&
                    (!free[r * cols + nc] || !free[nr * cols + c]))
                    continue;
                const double nd = d + (dr != 0 && dc != 0 ? diag : cell);
                if (nd < dist[nidx]) {
                    dist[nidx] = nd;
                    pq.push({nd, nidx});
                }
            }
    }
    return dist;
}

}  // namespace

double geodesic_distance(const World& world, const Vec3& p, const Vec3& q) {
    const GridCell cp = world.cell_of(p);
    const GridCell cq = world.cell_of(q);
    if (world.is_wall(cp.row, cp.col) || world.is_wall(cq.row, cq.col))
        throw std::invalid_argument("geodesic_distance: endpoint off free space");
    const int rows = world.rows(), cols = world.cols();
    std::vector<char> free(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) free[r * cols + c] = world.is_free(r, c);
    const std::vector<double> dist =
        grid_dijkstra(rows, cols, world.cell_size, free, {cp.row * cols + cp.col});
    return dist[cq.row * cols + cq.col];
}

double GeodesicField::at(const Vec3& p) const {
    const int c = static_cast<int>(std::floor(p.x / cell));
    const int r = static_cast<int>(std::floor(p.z / cell));
    if (r < 0 || r >= rows || c < 0 || c >= cols) return kInf;
    return values[static_cast<std::size_t>(r) * cols + c];
}

GeodesicField object_distance_field(const World& world, const std::string& category,
                                    int refine) {
    if (refine < 1) throw std::invalid_argument("object_distance_field: refine must be >= 1");
    GeodesicField field;
    field.rows = world.rows() * refine;
    field.cols = world.cols() * refine;
    field.cell = world.cell_size / refine;
    std::vector<char> free(static_cast<std::size_t>(field.rows) * field.cols);
    for (int r = 0; r < field.rows; ++r)
        for (int c = 0; c < field.cols; ++c)
            free[static_cast<std::size_t>(r) * field.cols + c] =
                world.is_free(r / refine, c / refine);
    std::vector<int> sources;
    for (const WorldObject& obj : world.objects) {
        if (obj.category != category) continue;
        for (const GridCell& cell : obj.cells)
            for (int rr = 0; rr < refine; ++rr)
                for (int cc = 0; cc < refine; ++cc)
                    sources.push_back((cell.row * refine + rr) * field.cols +
                                      cell.col * refine + cc);
    }
    field.values = grid_dijkstra(field.rows, field.cols, field.cell, free, sources);
    return field;
}

bool position_clear(const World& world, const Vec3& p, double clearance) {
    const GridCell cell = world.cell_of(p);
    if (!world.in_bounds(cell.row, cell.col)) return false;
    if (world.is_wall(cell.row, cell.col) || world.object_at(cell.row, cell.col) >= 0)
        return false;
    const double cs = world.cell_size;
    const int r0 = static_cast<int>(std::floor((p.z - clearance) / cs));
    const int r1 = static_cast<int>(std::floor((p.z + clearance) / cs));
    const int c0 = static_cast<int>(std::floor((p.x - clearance) / cs));
    const int c1 = static_cast<int>(std::floor((p.x + clearance) / cs));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            if (!world.is_wall(r, c) && world.object_at(r, c) < 0) continue;
            const double nx = std::clamp(p.x, c * cs, (c + 1) * cs);
            const double nz = std::clamp(p.z, r * cs, (r + 1) * cs);
            const double dx = p.x - nx, dz = p.z - nz;
            if (dx * dx + dz * dz < clearance * clearance) return false;
        }
    return true;
}

Vec3 sample_free_position(const World& world, SplitMix64& rng, double clearance) {
    const double w = world.cols() * world.cell_size;
    const double h = world.rows() * world.cell_size;
    for (int attempt = 0; attempt < 20000; ++attempt) {
        Vec3 p{rng.uniform(0.0, w), 0.0, rng.uniform(0.0, h)};
        if (position_clear(world, p, clearance)) return p;
    }
    throw std::runtime_error("sample_free_position: no clear position found");
}

}  // namespace semnav
