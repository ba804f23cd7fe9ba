#include "semnav/scale.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "semnav/rng.hpp"

namespace semnav {

PointCloud select_ground_candidates(const PointCloud& cloud, double fraction) {
    if (cloud.size() < 10)
        throw std::runtime_error("select_ground_candidates: need at least 10 points");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("select_ground_candidates: fraction must be in (0,1]");
    const std::size_t n = cloud.size();
    const std::size_t keep =
        std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return cloud.points[i].y < cloud.points[j].y;
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());  // index order among the selected
    PointCloud out;
    out.points.reserve(keep);
    out.confidences.reserve(keep);
    for (std::size_t i : order) out.push_back(cloud.points[i], cloud.confidences[i]);
    return out;
}

namespace {

struct Plane {
    Vec3 n;     // unit normal
    double d = 0.0;
};

bool plane_from_points(const Vec3& p0, const Vec3& p1, const Vec3& p2, Plane& out) {
    const Vec3 u = p1 - p0, v = p2 - p0;
    const Vec3 n{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
    const double len = n.norm();
    if (len < 1e-12) return false;  // collinear sample
    out.n = n * (1.0 / len);
    out.d = -dot(out.n, p0);
    return true;
}

// least-squares plane through the centroid; normal = smallest-eigenvalue
// direction of the 3x3 scatter matrix, found by inverse power iteration
bool refit_plane(const PointCloud& cloud, const std::vector<int>& indices, Plane& out) {
    if (indices.size() < 3) return false;
    Vec3 centroid{0, 0, 0};
    for (int i : indices) centroid = centroid + cloud.points[i];
    centroid = centroid * (1.0 / static_cast<double>(indices.size()));
    double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
    for (int i : indices) {
        const Vec3 q = cloud.points[i] - centroid;
        xx += q.x * q.x;
        xy += q.x * q.y;
        xz += q.x * q.z;
        yy += q.y * q.y;
        yz += q.y * q.z;
        zz += q.z * q.z;
    }
    // cross-product form: smallest-variance direction from the three
    // column cross products of the scatter matrix (robust for rank-2 data)
    const Vec3 r0{yy * zz - yz * yz, xz * yz - xy * zz, xy * yz - xz * yy};
    const Vec3 r1{xz * yz - xy * zz, xx * zz - xz * xz, xy * xz - yz * xx};
    const Vec3 r2{xy * yz - xz * yy, xy * xz - yz * xx, xx * yy - xy * xy};
    Vec3 n = r0;
    if (r1.squared_norm() > n.squared_norm()) n = r1;
    if (r2.squared_norm() > n.squared_norm()) n = r2;
    const double len = n.norm();
    if (len < 1e-18) return false;
    out.n = n * (1.0 / len);
    out.d = -dot(out.n, centroid);
    return true;
}

}  // namespace

PlaneCoeffs fit_ground_plane(const PointCloud& candidates, int iterations,
                             double inlier_tol, uint64_t seed) {
    const std::size_t n = candidates.size();
    if (n < 3) throw std::runtime_error("fit_ground_plane: need at least 3 points");
    SplitMix64 rng(mix_seed(seed, 0x9a45ac3ULL));

    Plane best;
    int best_inliers = -1;
    for (int it = 0; it < iterations; ++it) {
        const std::size_t i0 = rng.bounded(n);
        const std::size_t i1 = rng.bounded(n);
        const std::size_t i2 = rng.bounded(n);
        if (i0 == i1 || i1 == i2 || i0 == i2) continue;
        Plane p;
        if (!plane_from_points(candidates.points[i0], candidates.points[i1],
                               candidates.points[i2], p))
            continue;
        int inliers = 0;
        for (const Vec3& q : candidates.points)
            if (std::abs(dot(p.n, q) + p.d) <= inlier_tol) ++inliers;
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best = p;
        }
    }
    if (best_inliers < 3)
        throw std::runtime_error("fit_ground_plane: degenerate candidate set");

    std::vector<int> inlier_idx;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(dot(best.n, candidates.points[i]) + best.d) <= inlier_tol)
            inlier_idx.push_back(static_cast<int>(i));
    Plane refit;
    if (refit_plane(candidates, inlier_idx, refit)) {
        // keep the refit only if it explains at least as many points
        int inliers = 0;
        for (const Vec3& q : candidates.points)
            if (std::abs(dot(refit.n, q) + refit.d) <= inlier_tol) ++inliers;
        if (inliers >= best_inliers) {
            best = refit;
            best_inliers = inliers;
            inlier_idx.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (std::abs(dot(best.n, candidates.points[i]) + best.d) <= inlier_tol)
                    inlier_idx.push_back(static_cast<int>(i));
        }
    }

    // orient so the origin (the camera) sits on the positive side
    if (best.d < 0.0) {
        best.n = best.n * -1.0;
        best.d = -best.d;
    }

    PlaneCoeffs out;
    out.a = best.n.x;
    out.b = best.n.y;
    out.c = best.n.z;
    out.d = best.d;
    out.inlier_count = static_cast<int>(inlier_idx.size());
    out.inlier_fraction = static_cast<double>(out.inlier_count) / static_cast<double>(n);
    return out;
}

double ground_height(const PlaneCoeffs& plane) {
    const double norm =
        std::sqrt(plane.a * plane.a + plane.b * plane.b + plane.c * plane.c);
    if (norm < 1e-12) throw std::invalid_argument("ground_height: zero normal");
    return std::abs(plane.d) / norm;
}

MetricScale compute_scale(double h_real, double h_ground) {
    if (!(h_real > 0.0)) throw std::invalid_argument("compute_scale: h_real must be > 0");
    if (h_ground <= 1e-6)
        throw std::runtime_error("compute_scale: degenerate ground height");
    MetricScale s;
    s.h_real = h_real;
    s.h_ground = h_ground;
    s.scale = h_real / h_ground;
    return s;
}

namespace {

bool try_fit(const PointCloud& candidates, const PointCloud& cloud,
             const ScaleParams& params, uint64_t seed, MetricScale& out) {
    const PlaneCoeffs plane =
        fit_ground_plane(candidates, params.ransac_iterations, params.ransac_tolerance, seed);
    if (plane.inlier_fraction < params.min_inlier_fraction) return false;
    // a close-up wall can dominate the low-y candidates; only a plane that is
    // horizontal and below the camera counts as ground
    if (plane.b < params.min_up_normal) return false;
    const double h = ground_height(plane);
    if (h <= 1e-6) return false;
    // nothing in a scene lies beneath its floor, so a plane with real point
    // mass on the far side cut through the scene instead of the ground
    const double margin = 2.0 * params.ransac_tolerance;
    const std::size_t allowed = 3 + cloud.size() / 200;
    std::size_t below = 0;
    for (const Vec3& q : cloud.points)
        if (plane.a * q.x + plane.b * q.y + plane.c * q.z + plane.d < -margin)
            if (++below > allowed) return false;
    out = compute_scale(params.camera_height, h);
    return true;
}

}  // namespace

bool estimate_scale(const PointCloud& cloud, const ScaleParams& params, uint64_t seed,
                    MetricScale& out) {
    if (cloud.size() < 10) return false;
    try {
        const PointCloud candidates = select_ground_candidates(cloud, 0.2);
        if (try_fit(candidates, cloud, params, seed, out)) return true;
        // wall bases can outnumber floor points in the lowest-y slice; retry
        // on a thin slab above the minimum, which the floor sheet dominates
        double y_min = candidates.points.front().y;
        for (const Vec3& p : candidates.points) y_min = std::min(y_min, p.y);
        PointCloud slab;
        for (std::size_t i = 0; i < candidates.size(); ++i)
            if (candidates.points[i].y <= y_min + 0.25 * params.ransac_tolerance)
                slab.push_back(candidates.points[i], candidates.confidences[i]);
        if (slab.size() < 30) return false;
        return try_fit(slab, cloud, params, seed, out);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace semnav
