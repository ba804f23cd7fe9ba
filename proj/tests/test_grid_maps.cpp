#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "semnav/grid_maps.hpp"
#include "semnav/memory_bank.hpp"
#include "semnav/rng.hpp"

using namespace semnav;
using semnav::testutil::make_box_world;
using semnav::testutil::Rig;

namespace {

GridSpec spec01(int off_x, int off_z, int width, int height, Vec3 origin = {}) {
    GridSpec s;
    s.cell_size = 0.1;
    s.origin = origin;
    s.off_x = off_x;
    s.off_z = off_z;
    s.width = width;
    s.height = height;
    return s;
}

GridMaps blank_maps(const GridSpec& spec) {
    GridMaps m;
    m.spec = spec;
    const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
    m.obstacle.assign(n, CellState::unknown);
    m.explored.assign(n, 0);
    m.value.assign(n, 0.0);
    return m;
}

void set_free(GridMaps& m, int cx, int cz) {
    const std::size_t i = m.index({cx, cz});
    m.explored[i] = 1;
    m.obstacle[i] = CellState::free;
}

void set_obstacle(GridMaps& m, int cx, int cz) {
    const std::size_t i = m.index({cx, cz});
    m.explored[i] = 1;
    m.obstacle[i] = CellState::obstacle;
}

MemoryBank scaled_bank(double scale) {
    MemoryBank bank;
    bank.scale_known = true;
    bank.metric_scale.scale = scale;
    bank.metric_scale.h_real = 0.88;
    bank.metric_scale.h_ground = 0.88 / scale;
    return bank;
}

// Keyframe whose cloud holds the given world-metric points, stored in
// perception units for a bank with the given scale.
Keyframe keyframe_at(int id, const std::vector<std::pair<Vec3, double>>& metric_points,
                     double scale, double value_score = 0.0, bool scored = false) {
    Keyframe kf;
    kf.id = id;
    kf.value_score = value_score;
    kf.scored = scored;
    for (const auto& [p, conf] : metric_points) kf.cloud.push_back(p / scale, conf);
    return kf;
}

// Independent re-statement of the frontier predicate, evaluated per cell.
std::vector<MapCell> oracle_frontier_cells(const GridMaps& m) {
    std::vector<MapCell> out;
    const GridSpec& s = m.spec;
    for (int cz = s.off_z; cz < s.off_z + s.height; ++cz) {
        for (int cx = s.off_x; cx < s.off_x + s.width; ++cx) {
            if (m.obstacle[m.index({cx, cz})] != CellState::free) continue;
            bool boundary = false;
            for (int dz = -1; dz <= 1 && !boundary; ++dz)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dz == 0) continue;
                    const MapCell n{cx + dx, cz + dz};
                    if (in_bounds(s, n) && m.explored[m.index(n)] == 0) {
                        boundary = true;
                        break;
                    }
                }
            if (boundary) out.push_back({cx, cz});
        }
    }
    return out;
}

std::vector<MapCell> all_cluster_cells(const std::vector<FrontierCluster>& clusters) {
    std::vector<MapCell> out;
    for (const FrontierCluster& c : clusters) out.insert(out.end(), c.cells.begin(), c.cells.end());
    return out;
}

bool same_cell_set(std::vector<MapCell> a, std::vector<MapCell> b) {
    const auto lex = [](const MapCell& p, const MapCell& q) {
        return p.cz != q.cz ? p.cz < q.cz : p.cx < q.cx;
    };
    std::sort(a.begin(), a.end(), lex);
    std::sort(b.begin(), b.end(), lex);
    return a == b;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct Pnm {
    std::string magic;
    std::string comment;
    int width = 0, height = 0, maxval = 0;
    std::vector<uint8_t> bytes;
};

Pnm read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    Pnm img;
    std::string dims;
    std::getline(in, img.magic);
    std::getline(in, img.comment);
    std::getline(in, dims);
    std::sscanf(dims.c_str(), "%d %d", &img.width, &img.height);
    std::string maxval;
    std::getline(in, maxval);
    img.maxval = std::stoi(maxval);
    const int channels = img.magic == "P6" ? 3 : 1;
    img.bytes.resize(static_cast<std::size_t>(img.width) * img.height * channels);
    in.read(reinterpret_cast<char*>(img.bytes.data()),
            static_cast<std::streamsize>(img.bytes.size()));
    REQUIRE(in.gcount() == static_cast<std::streamsize>(img.bytes.size()));
    return img;
}

}  // namespace

TEST_CASE("cell arithmetic") {
    const GridSpec spec = spec01(-10, -10, 20, 20, {0.4, 0.0, -1.2});

    SUBCASE("origin maps to cell (0,0)") {
        CHECK(world_to_cell(spec, spec.origin) == MapCell{0, 0});
    }

    SUBCASE("quarter-meter offsets floor to cells (2,1)") {
        const Vec3 p = spec.origin + Vec3{0.25, 0.0, 0.15};
        CHECK(world_to_cell(spec, p) == MapCell{2, 1});
    }

    SUBCASE("cell to world round-trips, negatives included") {
        SplitMix64 rng(99);
        for (int i = 0; i < 200; ++i) {
            const MapCell c{static_cast<int>(rng.bounded(101)) - 50,
                            static_cast<int>(rng.bounded(101)) - 50};
            CHECK(world_to_cell(spec, cell_to_world(spec, c)) == c);
        }
    }

    SUBCASE("bounds follow the window") {
        CHECK(in_bounds(spec, {-10, -10}));
        CHECK(in_bounds(spec, {9, 9}));
        CHECK_FALSE(in_bounds(spec, {10, 0}));
        CHECK_FALSE(in_bounds(spec, {0, -11}));
    }
}

TEST_CASE("project_maps") {
    SUBCASE("unknown scale is rejected") {
        MemoryBank bank;
        ObjectStore store;
        CHECK_THROWS_AS(project_maps(bank, store, spec01(0, 0, 4, 3), 0.15, 1.6),
                        std::runtime_error);
    }

    SUBCASE("empty bank keeps the window and leaves it unknown") {
        MemoryBank bank = scaled_bank(1.0);
        ObjectStore store;
        const GridSpec spec = spec01(-2, -1, 4, 3);
        const GridMaps maps = project_maps(bank, store, spec, 0.15, 1.6);
        CHECK(maps.spec == spec);
        for (CellState s : maps.obstacle) CHECK(s == CellState::unknown);
        for (uint8_t e : maps.explored) CHECK(e == 0);
        for (double v : maps.value) CHECK(v == 0.0);
    }

    SUBCASE("wall column marks exactly its cell, floor points only explore") {
        MemoryBank bank = scaled_bank(2.0);
        bank.keyframes.push_back(keyframe_at(0,
                                             {{{1.02, -0.58, 2.04}, 5.0},
                                              {{1.02, -0.38, 2.04}, 5.0},
                                              {{1.02, 0.32, 2.04}, 5.0},
                                              {{0.55, -0.88, 0.35}, 5.0}},
                                             2.0));
        ObjectStore store;
        const GridMaps maps = project_maps(bank, store, spec01(0, 0, 0, 0), 0.15, 1.6);
        int obstacles = 0;
        for (CellState s : maps.obstacle) obstacles += s == CellState::obstacle;
        CHECK(obstacles == 1);
        CHECK(maps.obstacle_at({10, 20}) == CellState::obstacle);
        CHECK(maps.explored_at({10, 20}));
        CHECK(maps.obstacle_at({5, 3}) == CellState::free);
        CHECK(maps.explored_at({5, 3}));
        int explored = 0;
        for (uint8_t e : maps.explored) explored += e != 0;
        CHECK(explored == 2);
    }

    SUBCASE("floor-only clouds never mark obstacles") {
        MemoryBank bank = scaled_bank(1.0);
        std::vector<std::pair<Vec3, double>> pts;
        for (int i = 0; i < 40; ++i)
            pts.push_back({{0.1 * i, -0.88 + 0.001 * (i % 3), 0.07 * i}, 3.0});
        bank.keyframes.push_back(keyframe_at(0, pts, 1.0));
        ObjectStore store;
        const GridMaps maps = project_maps(bank, store, spec01(0, 0, 0, 0), 0.15, 1.6);
        for (CellState s : maps.obstacle) CHECK(s != CellState::obstacle);
        int explored = 0;
        for (uint8_t e : maps.explored) explored += e != 0;
        CHECK(explored > 0);
    }

    SUBCASE("store objects project in metric coordinates") {
        MemoryBank bank = scaled_bank(2.0);
        ObjectStore store;
        SemanticObject obj;
        obj.cloud.push_back({0.32, -0.38, 0.12}, 2.5);  // metric, height 0.5
        store.objects.push_back(obj);
        const GridMaps maps = project_maps(bank, store, spec01(0, 0, 0, 0), 0.15, 1.6);
        CHECK(maps.obstacle_at({3, 1}) == CellState::obstacle);
    }

    SUBCASE("window grows to cover every projected point") {
        MemoryBank bank = scaled_bank(1.0);
        bank.keyframes.push_back(keyframe_at(
            0, {{{-1.23, -0.4, 2.9}, 3.0}, {{3.77, -0.4, -0.61}, 3.0}}, 1.0));
        ObjectStore store;
        const GridMaps maps = project_maps(bank, store, spec01(0, 0, 1, 1), 0.15, 1.6);
        CHECK(in_bounds(maps.spec, world_to_cell(maps.spec, {-1.23, 0, 2.9})));
        CHECK(in_bounds(maps.spec, world_to_cell(maps.spec, {3.77, 0, -0.61})));
        CHECK(in_bounds(maps.spec, {0, 0}));
        CHECK(maps.obstacle_at(world_to_cell(maps.spec, {-1.23, 0, 2.9})) == CellState::obstacle);
    }

    SUBCASE("exploration grows monotonically with the bank") {
        Rig rig(make_box_world(16, 16));
        MemoryBank bank;
        MemoryParams mem;
        ScaleParams sp;
        ObjectStore store;
        const GridSpec spec = spec01(0, 0, 0, 0);
        GridMaps prev;
        bool have_prev = false;
        const double yaws[] = {0.0, M_PI / 2.0, M_PI, -M_PI / 2.0};
        for (double yaw : yaws) {
            const Observation obs = rig.shoot(2.0, 2.0, yaw, -0.5);
            maybe_insert_keyframe(bank, obs, obs.estimated_pose, mem, sp);
            const GridMaps maps = project_maps(bank, store, spec, 0.15, 1.6);
            if (have_prev) {
                for (int cz = prev.spec.off_z; cz < prev.spec.off_z + prev.spec.height; ++cz)
                    for (int cx = prev.spec.off_x; cx < prev.spec.off_x + prev.spec.width; ++cx)
                        if (prev.explored_at({cx, cz})) CHECK(maps.explored_at({cx, cz}));
            }
            // obstacles only on explored cells
            for (int cz = maps.spec.off_z; cz < maps.spec.off_z + maps.spec.height; ++cz)
                for (int cx = maps.spec.off_x; cx < maps.spec.off_x + maps.spec.width; ++cx)
                    if (maps.obstacle_at({cx, cz}) == CellState::obstacle)
                        CHECK(maps.explored_at({cx, cz}));
            prev = maps;
            have_prev = true;
        }
        CHECK(bank.keyframes.size() >= 3);
    }
}

TEST_CASE("window growth preserves states bit-exactly") {
    MemoryBank bank = scaled_bank(1.0);
    bank.keyframes.push_back(keyframe_at(0,
                                         {{{0.52, -0.3, 0.81}, 3.0},
                                          {{0.13, -0.88, 0.42}, 3.0},
                                          {{-0.77, 0.1, 1.11}, 3.0}},
                                         1.0));
    ObjectStore store;
    GridMaps maps = project_maps(bank, store, spec01(0, 0, 0, 0), 0.15, 1.6);
    const GridSpec before = maps.spec;
    std::vector<std::pair<MapCell, CellState>> snapshot;
    for (int cz = before.off_z; cz < before.off_z + before.height; ++cz)
        for (int cx = before.off_x; cx < before.off_x + before.width; ++cx)
            snapshot.push_back({{cx, cz}, maps.obstacle_at({cx, cz})});

    const MapCell far = ensure_covers(maps, {-3.7, 0.0, 9.9});
    CHECK(in_bounds(maps.spec, far));
    CHECK(maps.spec.width > before.width);
    CHECK(maps.spec.origin == before.origin);  // the anchor never moves
    CHECK(maps.obstacle_at(far) == CellState::unknown);
    for (const auto& [cell, state] : snapshot) CHECK(maps.obstacle_at(cell) == state);

    mark_traversed(maps, {-3.7, 0.0, 9.9});
    CHECK(maps.obstacle_at(far) == CellState::free);
    CHECK(maps.explored_at(far));
    // a known obstacle is not overwritten by traversal marking
    const MapCell wall = world_to_cell(maps.spec, {0.52, 0.0, 0.81});
    mark_traversed(maps, {0.52, 0.0, 0.81});
    CHECK(maps.obstacle_at(wall) == CellState::obstacle);
}

TEST_CASE("detect_frontiers") {
    SUBCASE("fully explored window has none") {
        GridMaps m = blank_maps(spec01(0, 0, 12, 9));
        for (int cz = 0; cz < 9; ++cz)
            for (int cx = 0; cx < 12; ++cx) set_free(m, cx, cz);
        CHECK(detect_frontiers(m, 1).empty());
    }

    SUBCASE("explored disc in unknown surroundings yields its boundary ring") {
        GridMaps m = blank_maps(spec01(0, 0, 21, 21));
        for (int cz = 0; cz < 21; ++cz)
            for (int cx = 0; cx < 21; ++cx)
                if ((cx - 10) * (cx - 10) + (cz - 10) * (cz - 10) <= 25) set_free(m, cx, cz);
        const auto clusters = detect_frontiers(m, 3);
        REQUIRE(clusters.size() == 1);
        CHECK(same_cell_set(all_cluster_cells(clusters), oracle_frontier_cells(m)));
        CHECK(clusters[0].size == static_cast<int>(clusters[0].cells.size()));
        CHECK(clusters[0].centroid.x == doctest::Approx(1.05));
        CHECK(clusters[0].centroid.z == doctest::Approx(1.05));
    }

    SUBCASE("a region sealed by obstacles has none") {
        GridMaps m = blank_maps(spec01(0, 0, 9, 9));
        for (int cz = 2; cz <= 6; ++cz)
            for (int cx = 2; cx <= 6; ++cx) {
                if (cz == 2 || cz == 6 || cx == 2 || cx == 6)
                    set_obstacle(m, cx, cz);
                else
                    set_free(m, cx, cz);
            }
        CHECK(detect_frontiers(m, 1).empty());
    }

    SUBCASE("clusters below the minimum size are dropped") {
        // two single-cell frontiers separated by an unknown gap
        GridMaps m = blank_maps(spec01(0, 0, 5, 1));
        set_free(m, 0, 0);
        set_free(m, 1, 0);
        set_free(m, 3, 0);
        set_free(m, 4, 0);
        CHECK(detect_frontiers(m, 3).empty());
        const auto clusters = detect_frontiers(m, 1);
        REQUIRE(clusters.size() == 2);
        CHECK(clusters[0].cells == std::vector<MapCell>{{1, 0}});
        CHECK(clusters[1].cells == std::vector<MapCell>{{3, 0}});
    }

    SUBCASE("ordering is size descending, then centroid") {
        GridMaps m = blank_maps(spec01(0, 0, 16, 8));
        for (int cz = 0; cz < 8; ++cz)
            for (int cx = 0; cx < 16; ++cx) set_free(m, cx, cz);
        // carve two unknown pockets: a 2-cell pocket grows a larger ring
        m.explored[m.index({3, 3})] = 0;
        m.obstacle[m.index({3, 3})] = CellState::unknown;
        m.explored[m.index({3, 4})] = 0;
        m.obstacle[m.index({3, 4})] = CellState::unknown;
        m.explored[m.index({11, 3})] = 0;
        m.obstacle[m.index({11, 3})] = CellState::unknown;
        const auto clusters = detect_frontiers(m, 3);
        REQUIRE(clusters.size() == 2);
        CHECK(clusters[0].size == 10);
        CHECK(clusters[1].size == 8);
        CHECK(clusters[0].centroid.x < clusters[1].centroid.x);
    }

    SUBCASE("matches the per-cell predicate on random maps") {
        SplitMix64 rng(4242);
        for (int trial = 0; trial < 25; ++trial) {
            GridMaps m = blank_maps(spec01(-3, 2, 15, 15));
            for (int cz = 2; cz < 17; ++cz)
                for (int cx = -3; cx < 12; ++cx) {
                    const uint64_t r = rng.bounded(10);
                    if (r < 4) continue;  // unknown
                    if (r < 8)
                        set_free(m, cx, cz);
                    else
                        set_obstacle(m, cx, cz);
                }
            CHECK(same_cell_set(all_cluster_cells(detect_frontiers(m, 1)),
                                oracle_frontier_cells(m)));
        }
    }
}

TEST_CASE("build_value_map") {
    const GridSpec spec = spec01(0, 0, 30, 30);

    SUBCASE("no keyframes give a zero raster") {
        MemoryBank bank;
        const auto value = build_value_map(bank, spec);
        CHECK(value.size() == 900);
        for (double v : value) CHECK(v == 0.0);
    }

    SUBCASE("an unscored bank is rejected") {
        MemoryBank bank = scaled_bank(1.0);
        bank.keyframes.push_back(keyframe_at(0, {{{0.5, -0.3, 0.5}, 2.5}}, 1.0, 0.0, false));
        CHECK_THROWS_AS(build_value_map(bank, spec), std::runtime_error);
    }

    SUBCASE("a scored bank without scale is rejected") {
        MemoryBank bank;
        bank.keyframes.push_back(keyframe_at(0, {{{0.5, -0.3, 0.5}, 2.5}}, 1.0, 0.9, true));
        CHECK_THROWS_AS(build_value_map(bank, spec), std::runtime_error);
    }

    SUBCASE("confident points paint the keyframe score, others nothing") {
        MemoryBank bank = scaled_bank(2.0);
        bank.keyframes.push_back(keyframe_at(0,
                                             {{{0.55, -0.3, 0.35}, 2.5},
                                              {{1.25, -0.3, 0.35}, 1.9},
                                              {{1.55, -0.3, 1.35}, 1.2}},
                                             2.0, 0.9, true));
        const auto value = build_value_map(bank, spec);
        CHECK(value[3 * 30 + 5] == 0.9);   // cell (5,3)
        CHECK(value[3 * 30 + 12] == 0.0);  // confidence 1.9 is not > 1.9
        CHECK(value[13 * 30 + 15] == 0.0);
        int painted = 0;
        for (double v : value) painted += v != 0.0;
        CHECK(painted == 1);
    }

    SUBCASE("overlapping keyframes compose with max") {
        MemoryBank bank = scaled_bank(1.0);
        bank.keyframes.push_back(keyframe_at(
            0, {{{0.55, -0.3, 0.35}, 2.5}, {{0.85, -0.3, 0.35}, 2.5}}, 1.0, 0.4, true));
        bank.keyframes.push_back(keyframe_at(
            1, {{{0.55, -0.3, 0.35}, 2.5}, {{1.15, -0.3, 0.35}, 2.5}}, 1.0, 0.9, true));
        const auto value = build_value_map(bank, spec);
        CHECK(value[3 * 30 + 5] == 0.9);
        CHECK(value[3 * 30 + 8] == 0.4);
        CHECK(value[3 * 30 + 11] == 0.9);
    }

    SUBCASE("adding a keyframe never lowers a cell, raster stays in [0,1]") {
        SplitMix64 rng(777);
        MemoryBank bank = scaled_bank(1.0);
        std::vector<double> prev(900, 0.0);
        for (int k = 0; k < 6; ++k) {
            std::vector<std::pair<Vec3, double>> pts;
            for (int i = 0; i < 30; ++i)
                pts.push_back({{0.1 * static_cast<double>(rng.bounded(30)), -0.3,
                                0.1 * static_cast<double>(rng.bounded(30))},
                               2.0 + static_cast<double>(rng.bounded(20)) / 10.0});
            const double score = static_cast<double>(rng.bounded(1001)) / 1000.0;
            bank.keyframes.push_back(keyframe_at(k, pts, 1.0, score, true));
            const auto value = build_value_map(bank, spec);
            for (std::size_t i = 0; i < value.size(); ++i) {
                CHECK(value[i] >= prev[i]);
                CHECK(value[i] >= 0.0);
                CHECK(value[i] <= 1.0);
            }
            prev = value;
        }
    }
}

TEST_CASE("raster exports") {
    MemoryBank bank = scaled_bank(2.0);
    bank.keyframes.push_back(keyframe_at(0,
                                         {{{1.02, -0.38, 2.04}, 5.0},
                                          {{0.55, -0.88, 0.35}, 1.5}},
                                         2.0, 0.9, true));
    ObjectStore store;
    GridMaps maps = project_maps(bank, store, spec01(0, 0, 0, 0), 0.15, 1.6);
    maps.value = build_value_map(bank, maps.spec, 1.9);

    SUBCASE("obstacle pgm encodes the three states") {
        const std::string path = temp_path("semnav_obstacle.pgm");
        write_obstacle_pgm(maps, path);
        const Pnm img = read_pnm(path);
        CHECK(img.magic == "P5");
        CHECK(img.width == maps.spec.width);
        CHECK(img.height == maps.spec.height);
        CHECK(img.comment.find("cell_size 0.1") != std::string::npos);
        CHECK(img.comment.find("off") != std::string::npos);
        CHECK(img.bytes[maps.index({10, 20})] == 0);
        CHECK(img.bytes[maps.index({5, 3})] == 255);
        bool has_unknown = false;
        for (uint8_t b : img.bytes) has_unknown |= b == 127;
        CHECK(has_unknown);
        std::filesystem::remove(path);
    }

    SUBCASE("explored and value pgms scale to [0,255]") {
        const std::string ep = temp_path("semnav_explored.pgm");
        const std::string vp = temp_path("semnav_value.pgm");
        write_explored_pgm(maps, ep);
        write_value_pgm(maps, vp);
        const Pnm explored = read_pnm(ep);
        const Pnm value = read_pnm(vp);
        CHECK(explored.bytes[maps.index({10, 20})] == 255);
        CHECK(explored.bytes[maps.index({6, 3})] == 0);
        CHECK(value.bytes[maps.index({10, 20})] == 230);  // round(0.9 * 255)
        CHECK(value.bytes[maps.index({5, 3})] == 0);
        std::filesystem::remove(ep);
        std::filesystem::remove(vp);
    }

    SUBCASE("composite ppm paints the palette") {
        const std::string path = temp_path("semnav_composite.ppm");
        const auto frontiers = detect_frontiers(maps, 1);
        const std::vector<Vec3> trajectory = {{0.95, 0.0, 0.55}};
        write_composite_ppm(maps, frontiers, trajectory, path);
        const Pnm img = read_pnm(path);
        CHECK(img.magic == "P6");
        const auto rgb_at = [&](const MapCell& c) {
            const std::size_t i = maps.index(c) * 3;
            return std::vector<uint8_t>{img.bytes[i], img.bytes[i + 1], img.bytes[i + 2]};
        };
        CHECK(rgb_at({10, 20}) == std::vector<uint8_t>{220, 40, 40});   // obstacle red
        CHECK(rgb_at({9, 5}) == std::vector<uint8_t>{40, 160, 60});     // trajectory green
        bool has_yellow = false;
        for (const FrontierCluster& cl : frontiers)
            for (const MapCell& c : cl.cells)
                has_yellow |= rgb_at(c) == std::vector<uint8_t>{250, 220, 60};
        if (!frontiers.empty()) CHECK(has_yellow);
        std::filesystem::remove(path);
    }
}
