#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "semnav/world.hpp"

using namespace semnav;
using semnav::testutil::make_box_world;
using semnav::testutil::make_world_from_rows;

namespace {

int flood_fill_free_count(const World& w) {
    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < w.rows() && stack.empty(); ++r)
        for (int c = 0; c < w.cols() && stack.empty(); ++c)
            if (w.is_free(r, c)) stack.push_back({r, c});
    while (!stack.empty()) {
        auto [r, c] = stack.back();
        stack.pop_back();
        if (!w.is_free(r, c) || !seen.insert({r, c}).second) continue;
        stack.push_back({r + 1, c});
        stack.push_back({r - 1, c});
        stack.push_back({r, c + 1});
        stack.push_back({r, c - 1});
    }
    return static_cast<int>(seen.size());
}

int total_free_count(const World& w) {
    int n = 0;
    for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c)
            if (w.is_free(r, c)) ++n;
    return n;
}

std::string world_fingerprint(const World& w) {
    std::string s;
    for (const auto& row : w.grid) s += row + "\n";
    for (const auto& o : w.objects) {
        s += o.category + ":" + std::to_string(o.height) + ":";
        for (const auto& c : o.cells)
            s += std::to_string(c.row) + "," + std::to_string(c.col) + ";";
    }
    s += std::to_string(w.scale_factor);
    return s;
}

}  // namespace

TEST_CASE("minimal world file loads") {
    const std::string path = "tmp_world_minimal.json";
    std::ofstream out(path);
    out << R"({
      "cell_size": 0.25,
      "grid": ["#####", "#...#", "#...#", "#...#", "#####"],
      "objects": [{"category": "chair", "cells": [[1, 1]], "height": 0.9}],
      "camera_height": 0.88,
      "scale_factor": 1.0,
      "seed": 3
    })";
    out.close();
    World w = load_world(path);
    CHECK(w.objects.size() == 1);
    CHECK(w.rows() == 5);
    CHECK(w.objects[0].category == "chair");
    std::remove(path.c_str());
}

TEST_CASE("object on a wall cell fails validation") {
    const std::string path = "tmp_world_badobj.json";
    std::ofstream out(path);
    out << R"({
      "cell_size": 0.25,
      "grid": ["#####", "#...#", "#...#", "#...#", "#####"],
      "objects": [{"category": "chair", "cells": [[0, 0]], "height": 0.9}],
      "camera_height": 0.88,
      "scale_factor": 1.0,
      "seed": 3
    })";
    out.close();
    CHECK_THROWS_WITH_AS(load_world(path), doctest::Contains("free cells"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("save then load is structurally identity") {
    World w = generate_world(42, 4, {"bed", "toilet"});
    const std::string path = "tmp_world_roundtrip.json";
    save_world(w, path);
    World back = load_world(path);
    CHECK(back.grid == w.grid);
    CHECK(back.cell_size == w.cell_size);
    CHECK(back.scale_factor == w.scale_factor);
    CHECK(back.seed == w.seed);
    CHECK(back.objects.size() == w.objects.size());
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
        CHECK(back.objects[i].category == w.objects[i].category);
        CHECK(back.objects[i].height == w.objects[i].height);
        CHECK(back.objects[i].cells.size() == w.objects[i].cells.size());
    }
    std::remove(path.c_str());
}

TEST_CASE("generation is deterministic and connected") {
    World a = generate_world(7, 4, {"bed", "toilet"});
    World b = generate_world(7, 4, {"bed", "toilet"});
    CHECK(world_fingerprint(a) == world_fingerprint(b));

    CHECK(flood_fill_free_count(a) == total_free_count(a));

    bool has_bed = false, has_toilet = false;
    for (const auto& o : a.objects) {
        if (o.category == "bed") has_bed = true;
        if (o.category == "toilet") has_toilet = true;
    }
    CHECK(has_bed);
    CHECK(has_toilet);

    for (uint64_t seed = 100; seed < 110; ++seed) {
        World w = generate_world(seed, 1 + static_cast<int>(seed % 5), {});
        CHECK(flood_fill_free_count(w) == total_free_count(w));
        CHECK(w.scale_factor >= 0.2);
        CHECK(w.scale_factor <= 5.0);
    }
}

TEST_CASE("forward step moves exactly 0.25 m in open space") {
    World w = make_box_world(20, 20);
    EpisodeParams ep;
    Pose p = camera_pose(w, {2.5, 0, 2.5}, 0.7);
    StepOutcome out = step_dynamics(w, p, Action::move_forward, ep);
    CHECK(!out.collided);
    CHECK(distance(out.pose.position, p.position) == doctest::Approx(0.25).epsilon(1e-12));
    const Vec3 expect = p.position + p.forward() * 0.25;
    CHECK(distance(out.pose.position, expect) < 1e-12);
}

TEST_CASE("forward into a wall collides and leaves pose unchanged") {
    World w = make_box_world(8, 8);
    EpisodeParams ep;
    // facing -x, 0.3 m from the boundary wall at x = 0.25
    Pose p = camera_pose(w, {0.4, 0, 1.0}, M_PI);
    StepOutcome out = step_dynamics(w, p, Action::move_forward, ep);
    CHECK(out.collided);
    CHECK(out.pose.position.x == p.position.x);
    CHECK(out.pose.position.z == p.position.z);

    // object cells block too
    World wo = make_box_world(8, 8);
    wo.objects.push_back({"chair", {{4, 4}}, 0.9});
    Pose q = camera_pose(wo, {4 * 0.25 + 0.125, 0, 4.5 * 0.25}, -M_PI / 2);
    // facing +z toward the object cell half a cell away
    StepOutcome o2 = step_dynamics(wo, q, Action::move_forward, ep);
    CHECK(o2.collided);
}

TEST_CASE("twelve left turns return to the starting yaw") {
    World w = make_box_world(8, 8);
    EpisodeParams ep;
    Pose p = camera_pose(w, {1.0, 0, 1.0}, 0.37);
    Pose cur = p;
    for (int i = 0; i < 12; ++i) cur = step_dynamics(w, cur, Action::turn_left, ep).pose;
    CHECK(std::abs(wrap_angle(cur.yaw - p.yaw)) < 1e-12);
}

TEST_CASE("look actions clamp pitch") {
    World w = make_box_world(8, 8);
    EpisodeParams ep;
    Pose p = camera_pose(w, {1.0, 0, 1.0}, 0.0);
    for (int i = 0; i < 5; ++i) p = step_dynamics(w, p, Action::look_up, ep).pose;
    CHECK(p.pitch == doctest::Approx(M_PI / 3));
    for (int i = 0; i < 10; ++i) p = step_dynamics(w, p, Action::look_down, ep).pose;
    CHECK(p.pitch == doctest::Approx(-M_PI / 3));
    Pose stopped = step_dynamics(w, p, Action::stop, ep).pose;
    CHECK(stopped.position.x == p.position.x);
    CHECK(stopped.pitch == p.pitch);
}

TEST_CASE("observation basics facing a wall") {
    World w = make_box_world(12, 12, 0.25, 1.0);
    WorldParams wp;
    // 1 m from the +x wall at x = 11*0.25 = 2.75
    Pose pose = camera_pose(w, {1.75, 0, 1.5}, 0.0);
    DriftState drift = make_drift_state(w.seed, 0);
    PerceptionFrame frame{pose.position};
    Observation obs = observe(w, pose, drift, frame, 0, wp);
    CHECK(!obs.cloud.empty());
    for (std::size_t i = 0; i < obs.cloud.size(); ++i) {
        const Vec3 rel = obs.cloud.points[i] - obs.estimated_pose.position;
        CHECK(rel.norm() <= 5.0 / w.scale_factor + 1e-3);
        CHECK(obs.cloud.confidences[i] >= 1.0);
        CHECK(obs.cloud.confidences[i] <= 11.0);
    }
    // frame 0 with fresh drift: estimated pose sits at the frame origin
    CHECK(obs.estimated_pose.position.norm() < 1e-12);
}

TEST_CASE("observation determinism") {
    World w = generate_world(9, 3, {"chair", "sofa"});
    WorldParams wp;
    SplitMix64 rng(4);
    Vec3 p = sample_free_position(w, rng, 0.3);
    Pose pose = camera_pose(w, p, 1.1, -0.2);
    DriftState drift = make_drift_state(w.seed, 5);
    for (int i = 0; i < 10; ++i) advance_drift(drift, wp);
    PerceptionFrame frame{camera_pose(w, p, 0, 0).position};
    Observation a = observe(w, pose, drift, frame, 3, wp);
    Observation b = observe(w, pose, drift, frame, 3, wp);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (std::size_t i = 0; i < a.cloud.size(); ++i) {
        CHECK(a.cloud.points[i].x == b.cloud.points[i].x);
        CHECK(a.cloud.confidences[i] == b.cloud.confidences[i]);
    }
    REQUIRE(a.detections.size() == b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
        CHECK(a.detections[i].category == b.detections[i].category);
        CHECK(a.detections[i].point_indices == b.detections[i].point_indices);
        CHECK(a.detections[i].detector_confidence == b.detections[i].detector_confidence);
    }
}

TEST_CASE("scale linearity of observations") {
    World w1 = make_box_world(12, 12, 0.25, 1.0);
    w1.objects.push_back({"chair", {{5, 7}}, 0.9});
    World w2 = w1;
    w2.scale_factor = 2.0;
    WorldParams wp;
    Pose pose = camera_pose(w1, {0.8, 0, 1.4}, 0.3, -0.1);
    DriftState d1 = make_drift_state(w1.seed, 2);
    DriftState d2 = make_drift_state(w2.seed, 2);
    PerceptionFrame f{pose.position};
    Observation a = observe(w1, pose, d1, f, 1, wp);
    Observation b = observe(w2, pose, d2, f, 1, wp);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (std::size_t i = 0; i < a.cloud.size(); ++i) {
        CHECK(std::abs(a.cloud.points[i].x - 2.0 * b.cloud.points[i].x) < 1e-9);
        CHECK(std::abs(a.cloud.points[i].y - 2.0 * b.cloud.points[i].y) < 1e-9);
        CHECK(std::abs(a.cloud.points[i].z - 2.0 * b.cloud.points[i].z) < 1e-9);
    }
}

TEST_CASE("occluded object yields no detection") {
    // wall separates the two halves except for no gap at all
    World w = make_world_from_rows({
        "###########",
        "#....#....#",
        "#....#....#",
        "#....#....#",
        "#....#....#",
        "#....#....#",
        "###########",
    });
    w.objects.push_back({"chair", {{3, 8}}, 0.9});
    WorldParams wp;
    Pose pose = camera_pose(w, {0.5, 0, 3 * 0.25 + 0.1}, 0.0);  // facing +x at the wall
    DriftState drift = make_drift_state(w.seed, 0);
    Observation obs = observe(w, pose, drift, {pose.position}, 0, wp);
    CHECK(obs.detections.empty());
}

TEST_CASE("visible object is detected with valid indices") {
    World w = make_box_world(16, 16, 0.25, 1.0);
    w.objects.push_back({"sofa", {{7, 10}, {8, 10}, {9, 10}}, 0.85});
    WorldParams wp;
    Pose pose = camera_pose(w, {1.0, 0, 2.0}, 0.0);  // looking +x toward col 10
    DriftState drift = make_drift_state(w.seed, 0);
    Observation obs = observe(w, pose, drift, {pose.position}, 0, wp);
    REQUIRE(obs.detections.size() == 1);
    const Detection& det = obs.detections[0];
    CHECK(det.category == "sofa");
    CHECK(!det.point_indices.empty());
    CHECK(det.detector_confidence > 0.0);
    CHECK(det.detector_confidence <= 1.0);
    CHECK(std::abs(det.feature.norm() - 1.0) < 1e-9);

    // indices are valid and the referenced true positions sit inside the
    // footprint volume inflated by one cell
    const double cs = w.cell_size;
    for (int idx : det.point_indices) {
        REQUIRE(idx >= 0);
        REQUIRE(idx < static_cast<int>(obs.cloud.size()));
        Vec3 perc = obs.cloud.points[idx];
        Vec3 cam = inverse_transform_point(perc, obs.estimated_pose);
        Vec3 world_pt = transform_point(cam * w.scale_factor, pose);
        CHECK(world_pt.x >= 10 * cs - cs);
        CHECK(world_pt.x <= 11 * cs + cs);
        CHECK(world_pt.z >= 7 * cs - cs);
        CHECK(world_pt.z <= 10 * cs + cs);
        CHECK(world_pt.y >= -0.01);
        CHECK(world_pt.y <= 0.85 + cs);
    }
}

TEST_CASE("observe rejects poses off free space") {
    World w = make_box_world(8, 8);
    w.objects.push_back({"chair", {{3, 3}}, 0.9});
    WorldParams wp;
    DriftState drift = make_drift_state(w.seed, 0);
    Pose wall_pose = camera_pose(w, {0.1, 0, 0.1}, 0.0);
    CHECK_THROWS_AS(observe(w, wall_pose, drift, {wall_pose.position}, 0, wp),
                    std::runtime_error);
    Pose obj_pose = camera_pose(w, {3.5 * 0.25, 0, 3.5 * 0.25}, 0.0);
    CHECK_THROWS_AS(observe(w, obj_pose, drift, {obj_pose.position}, 0, wp),
                    std::runtime_error);
}

TEST_CASE("drift stays bounded under the pull-back walk") {
    WorldParams wp;
    double mean_100 = 0.0, mean_400 = 0.0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        DriftState d = make_drift_state(11, seed);
        for (int i = 0; i < 100; ++i) advance_drift(d, wp);
        mean_100 += d.offset.norm();
        for (int i = 0; i < 300; ++i) advance_drift(d, wp);
        mean_400 += d.offset.norm();
    }
    mean_100 /= 100.0;
    mean_400 /= 100.0;
    // stationary process: no linear growth between n=100 and n=400
    CHECK(mean_400 < 2.0 * mean_100 + 1e-3);
    CHECK(mean_400 < 0.2);
    CHECK(mean_100 > 0.0);
}

TEST_CASE("geodesic distance basics") {
    World w = make_box_world(12, 12, 0.1);
    const Vec3 p{0.15, 0, 0.15};
    CHECK(geodesic_distance(w, p, p) == 0.0);

    // straight corridor: 10 cells apart at 0.1 m
    World corridor = make_world_from_rows(
        {"#############", "#...........#", "#############"}, 0.1);
    Vec3 a{0.15, 0, 0.15};
    Vec3 b{1.15, 0, 0.15};
    CHECK(geodesic_distance(corridor, a, b) == doctest::Approx(1.0));

    CHECK_THROWS_AS(geodesic_distance(corridor, a, Vec3{0.05, 0, 0.05}),
                    std::invalid_argument);
}

TEST_CASE("geodesic distance around a U detour matches hand count") {
    World w = make_world_from_rows({
        "#######",
        "#..#..#",
        "#..#..#",
        "#..#..#",
        "#.....#",
        "#######",
    }, 0.5);
    const Vec3 p = w.cell_center({1, 1});
    const Vec3 q = w.cell_center({1, 5});
    const double expect = 0.5 * (6.0 + 2.0 * std::sqrt(2.0));
    CHECK(geodesic_distance(w, p, q) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("disconnected regions give infinite distance") {
    World w = make_world_from_rows({
        "#######",
        "#..#..#",
        "#..#..#",
        "#..#..#",
        "#..#..#",
        "#######",
    }, 0.25);
    CHECK(std::isinf(geodesic_distance(w, w.cell_center({2, 1}), w.cell_center({2, 5}))));
}

TEST_CASE("object distance field covers the map") {
    World w = generate_world(21, 3, {"bed"});
    GeodesicField field = object_distance_field(w, "bed");
    CHECK(field.rows == w.rows() * 5);

    // zero at the footprint, positive and finite on reachable free space
    const WorldObject* bed = nullptr;
    for (const auto& o : w.objects)
        if (o.category == "bed") bed = &o;
    REQUIRE(bed != nullptr);
    CHECK(field.at(w.cell_center(bed->cells[0])) == 0.0);

    SplitMix64 rng(2);
    for (int i = 0; i < 20; ++i) {
        Vec3 p = sample_free_position(w, rng, 0.3);
        const double d = field.at(p);
        CHECK(d >= 0.0);
        CHECK(std::isfinite(d));
        // refined field can never exceed the world-grid oracle between
        // the same endpoints by more than a cell of slack
        const double coarse =
            geodesic_distance(w, p, w.cell_center(bed->cells[0]));
        CHECK(d <= coarse + w.cell_size * 2);
    }

    GeodesicField missing = object_distance_field(w, "zebra");
    CHECK(std::isinf(missing.at(w.cell_center({1, 1}))));
}

TEST_CASE("sampled free positions respect clearance") {
    World w = generate_world(5, 4, {"chair"});
    SplitMix64 rng(9);
    for (int i = 0; i < 50; ++i) {
        Vec3 p = sample_free_position(w, rng, 0.3);
        CHECK(position_clear(w, p, 0.3));
        GridCell cell = w.cell_of(p);
        CHECK(w.is_free(cell.row, cell.col));
        CHECK(w.object_at(cell.row, cell.col) < 0);
    }
}

TEST_CASE("category embeddings are stable unit vectors") {
    FeatureVec a = category_embedding("chair", 32);
    FeatureVec b = category_embedding("chair", 32);
    CHECK(a.values == b.values);
    CHECK(std::abs(a.norm() - 1.0) < 1e-12);
    FeatureVec c = category_embedding("bed", 32);
    CHECK(std::abs(cosine_similarity(a, c)) < 0.8);  // distinct categories separate
}
