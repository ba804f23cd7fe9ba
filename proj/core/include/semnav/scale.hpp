#pragma once

#include <cstdint>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"

namespace semnav {

// Metric scale recovery for the arbitrary-scale perception frame: fit the
// ground plane to the lowest points by RANSAC, read off the camera-to-ground
// height, and divide the known real camera height by it.

struct PlaneCoeffs {
    // plane a*x + b*y + c*z + d = 0 with (a,b,c) a unit normal
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    int inlier_count = 0;
    double inlier_fraction = 0.0;
};

struct MetricScale {
    double scale = 0.0;     // meters per perception unit
    double h_ground = 0.0;  // camera-to-ground distance, perception units
    double h_real = 0.0;    // assumed real camera height, meters
};

// The ceil(fraction * N) points with smallest y, ties broken by index order.
// Throws std::runtime_error if the cloud has fewer than 10 points.
PointCloud select_ground_candidates(const PointCloud& cloud, double fraction = 0.2);

// RANSAC over seeded 3-point samples; the winner is refit by least squares
// on its inliers and oriented so the origin has positive signed distance.
// Throws std::runtime_error when all samples are degenerate (collinear).
PlaneCoeffs fit_ground_plane(const PointCloud& candidates, int iterations,
                             double inlier_tol, uint64_t seed);

// |d| / ||(a,b,c)||; with a unit normal this is |d|.
double ground_height(const PlaneCoeffs& plane);

// h_real / h_ground. Throws std::runtime_error when h_ground <= 1e-6.
MetricScale compute_scale(double h_real, double h_ground);

// Convenience pipeline over one observation cloud; returns false (and leaves
// `out` untouched) when the fit fails or too few inliers support it.
bool estimate_scale(const PointCloud& cloud, const ScaleParams& params, uint64_t seed,
                    MetricScale& out);

// Exponential smoothing across keyframes to keep the map from breathing.
struct ScaleTracker {
    double alpha = 0.3;
    bool initialized = false;
    double smoothed = 1.0;

    void update(double scale) {
        if (!initialized) {
            smoothed = scale;
            initialized = true;
        } else {
            smoothed = alpha * scale + (1.0 - alpha) * smoothed;
        }
    }
};

}  // namespace semnav
