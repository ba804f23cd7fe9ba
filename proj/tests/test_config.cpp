#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "semnav/config.hpp"

using namespace semnav;

TEST_CASE("defaults carry the documented constants") {
    Config c;
    CHECK(c.world.camera_height == doctest::Approx(0.88));
    CHECK(c.world.max_range == doctest::Approx(5.0));
    CHECK(c.world.drift_pullback == doctest::Approx(0.95));
    CHECK(c.fusion.confidence_threshold == doctest::Approx(1.9));
    CHECK(c.fusion.tau == doctest::Approx(0.55));
    CHECK(c.memory.keyframe_novelty == doctest::Approx(0.333));
    CHECK(c.memory.min_inlier_ratio == doctest::Approx(0.3));
    CHECK(c.maps.cell_size == doctest::Approx(0.1));
    CHECK(c.planner_low.stop_radius == doctest::Approx(1.0));
    CHECK(c.episode.max_steps == 300);
    CHECK(c.episode.forward_step == doctest::Approx(0.25));
    CHECK(c.episode.turn_deg == doctest::Approx(30.0));
}

TEST_CASE("partial overlay keeps unmentioned defaults") {
    Config c = parse_config(R"({"fusion": {"tau": 0.7}, "episode": {"max_steps": 50}})");
    CHECK(c.fusion.tau == doctest::Approx(0.7));
    CHECK(c.fusion.w_visual == doctest::Approx(0.5));
    CHECK(c.episode.max_steps == 50);
    CHECK(c.episode.forward_step == doctest::Approx(0.25));
}

TEST_CASE("unknown keys and sections are rejected") {
    CHECK_THROWS_AS(parse_config(R"({"fusionn": {}})"), std::runtime_error);
    CHECK_THROWS_AS(parse_config(R"({"fusion": {"tau2": 1}})"), std::runtime_error);
    CHECK_THROWS_AS(parse_config(R"({"fusion": {"tau": "high"}})"), std::runtime_error);
    CHECK_THROWS_AS(parse_config(R"([1,2])"), std::runtime_error);
    CHECK_THROWS_AS(parse_config("{nope"), std::runtime_error);
}

TEST_CASE("serialize then parse is the identity") {
    Config c;
    c.fusion.tau = 0.61;
    c.planner_high.replan_period = 9;
    c.world.rays_x = 32;
    Config back = parse_config(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.fusion.tau == doctest::Approx(0.61));
    CHECK(back.planner_high.replan_period == 9);
    CHECK(back.world.rays_x == 32);
}

TEST_CASE("file round trip") {
    const std::string path = "tmp_config_roundtrip.json";
    Config c;
    c.maps.cell_size = 0.05;
    save_config(c, path);
    Config back = load_config(path);
    CHECK(back.maps.cell_size == doctest::Approx(0.05));
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_config("does_not_exist_config.json"), std::runtime_error);
}
