#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "semnav/rng.hpp"
#include "semnav/scale.hpp"
#include "semnav/world.hpp"

using namespace semnav;
using semnav::testutil::make_box_world;

namespace {

PointCloud plane_cloud(int n, double y, uint64_t seed, double extent = 2.0) {
    SplitMix64 rng(seed);
    PointCloud c;
    for (int i = 0; i < n; ++i)
        c.push_back({rng.uniform(-extent, extent), y, rng.uniform(-extent, extent)}, 2.0);
    return c;
}

}  // namespace

TEST_CASE("ground candidates pick the lowest fraction") {
    PointCloud c;
    for (int i = 0; i < 10; ++i)
        c.push_back({static_cast<double>(i), static_cast<double>(9 - i), 0.0}, 1.0 + i);
    PointCloud out = select_ground_candidates(c, 0.2);
    REQUIRE(out.size() == 2);
    // lowest y values belong to the last two input points
    CHECK(out.points[0].x == 8.0);
    CHECK(out.points[1].x == 9.0);
    CHECK(out.confidences[0] == doctest::Approx(9.0));

    SUBCASE("ties broken by index order") {
        PointCloud flat;
        for (int i = 0; i < 10; ++i)
            flat.push_back({static_cast<double>(i), 1.0, 0.0}, 1.0);
        PointCloud sel = select_ground_candidates(flat, 0.2);
        REQUIRE(sel.size() == 2);
        CHECK(sel.points[0].x == 0.0);
        CHECK(sel.points[1].x == 1.0);
    }

    SUBCASE("fraction one is the identity") {
        PointCloud all = select_ground_candidates(c, 1.0);
        REQUIRE(all.size() == c.size());
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(all.points[i].x == c.points[i].x);
    }

    SUBCASE("too few points rejected") {
        PointCloud tiny = plane_cloud(9, 0.0, 5);
        CHECK_THROWS_AS(select_ground_candidates(tiny, 0.2), std::runtime_error);
    }
}

TEST_CASE("noiseless plane fit recovers y = -1 exactly") {
    PointCloud c = plane_cloud(60, -1.0, 33);
    PlaneCoeffs p = fit_ground_plane(c, 100, 0.02, 7);
    CHECK(std::abs(p.a) < 1e-9);
    CHECK(p.b == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(p.c) < 1e-9);
    CHECK(p.d == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.inlier_fraction == doctest::Approx(1.0));
    CHECK(p.a * p.a + p.b * p.b + p.c * p.c == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("plane fit survives 30 percent outliers") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SplitMix64 rng(mix_seed(99, seed));
        PointCloud c = plane_cloud(70, -1.0, rng.next());
        for (int i = 0; i < 30; ++i)
            c.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 2.0);
        PlaneCoeffs p = fit_ground_plane(c, 200, 0.02, seed);
        const double h = ground_height(p);
        CHECK(h == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("plane fit is deterministic in candidates and seed") {
    PointCloud c = plane_cloud(50, -0.7, 12);
    PlaneCoeffs a = fit_ground_plane(c, 150, 0.02, 3);
    PlaneCoeffs b = fit_ground_plane(c, 150, 0.02, 3);
    CHECK(a.a == b.a);
    CHECK(a.b == b.b);
    CHECK(a.c == b.c);
    CHECK(a.d == b.d);
    CHECK(a.inlier_count == b.inlier_count);
}

TEST_CASE("collinear candidates are degenerate") {
    PointCloud line;
    for (int i = 0; i < 12; ++i) line.push_back({static_cast<double>(i), 0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(fit_ground_plane(line, 100, 0.02, 1), std::runtime_error);
}

TEST_CASE("ground height from plane coefficients") {
    CHECK(ground_height({0, 1, 0, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(ground_height({0, 2, 0, 3, 0, 0}) == doctest::Approx(1.5));
    CHECK(ground_height({0, 1, 0, 0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(ground_height({0, 0, 0, 1, 0, 0}), std::invalid_argument);

    SUBCASE("invariant under coefficient rescaling") {
        SplitMix64 rng(8);
        for (int i = 0; i < 30; ++i) {
            PlaneCoeffs p{rng.gaussian(), rng.gaussian(), rng.gaussian(),
                          rng.gaussian(), 0, 0};
            const double k = rng.uniform(0.1, 20.0) * (rng.bounded(2) ? 1.0 : -1.0);
            PlaneCoeffs ps{k * p.a, k * p.b, k * p.c, k * p.d, 0, 0};
            CHECK(std::abs(ground_height(p) - ground_height(ps)) < 1e-12);
        }
    }
}

TEST_CASE("scale computation") {
    MetricScale s = compute_scale(0.88, 1.0);
    CHECK(s.scale == doctest::Approx(0.88));
    CHECK(compute_scale(0.88, 0.44).scale == doctest::Approx(2.0));
    CHECK(std::abs(s.scale - s.h_real / s.h_ground) < 1e-12);
    CHECK_THROWS_AS(compute_scale(0.88, 0.0), std::runtime_error);
    CHECK_THROWS_AS(compute_scale(0.88, 1e-7), std::runtime_error);
    CHECK_THROWS_AS(compute_scale(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("metric scale recovered from synthetic observations") {
    const double sigmas[] = {0.2, 0.5, 1.0, 2.0, 5.0};
    WorldParams wp;
    ScaleParams sp;
    for (double sigma : sigmas) {
        World w = make_box_world(20, 20, 0.25, sigma);
        Pose pose = camera_pose(w, {2.0, 0, 2.0}, 0.9, -0.35);
        DriftState drift = make_drift_state(w.seed, 4);
        Observation obs = observe(w, pose, drift, {pose.position}, 0, wp);
        MetricScale ms;
        REQUIRE(estimate_scale(obs.cloud, sp, 17, ms));
        CHECK(ms.scale == doctest::Approx(sigma).epsilon(0.02));
    }
}

TEST_CASE("smoothing tracker converges to repeated estimates") {
    ScaleTracker t;
    t.alpha = 0.3;
    t.update(2.0);
    CHECK(t.smoothed == doctest::Approx(2.0));
    for (int i = 0; i < 60; ++i) t.update(3.0);
    CHECK(t.smoothed == doctest::Approx(3.0).epsilon(1e-6));
}
