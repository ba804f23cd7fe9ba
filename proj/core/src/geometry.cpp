#include "semnav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semnav {

double Vec3::norm() const { return std::sqrt(squared_norm()); }

double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

double wrap_angle(double radians) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    double a = std::fmod(radians, kTwoPi);
    if (a <= -3.14159265358979323846) a += kTwoPi;
    if (a > 3.14159265358979323846) a -= kTwoPi;
    return a;
}

Vec3 Pose::forward() const { return {std::cos(yaw), 0.0, -std::sin(yaw)}; }

Pose make_pose(const Vec3& position, double yaw, double pitch) {
    Pose p;
    p.position = position;
    p.yaw = wrap_angle(yaw);
    constexpr double kHalfPi = 1.57079632679489661923;
    p.pitch = std::clamp(pitch, -kHalfPi, kHalfPi);
    return p;
}

namespace {

inline Vec3 rotate_yaw(const Vec3& p, double c, double s) {
    // right-handed about +y
    return {c * p.x + s * p.z, p.y, -s * p.x + c * p.z};
}

inline Vec3 rotate_pitch(const Vec3& p, double c, double s) {
    // right-handed about +z (the lateral axis of an unrotated camera)
    return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

}  // namespace

Vec3 transform_point(const Vec3& p, const Pose& pose) {
    const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
    return rotate_yaw(rotate_pitch(p, cp, sp), cy, sy) + pose.position;
}

Vec3 inverse_transform_point(const Vec3& p, const Pose& pose) {
    const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
    const Vec3 q = p - pose.position;
    return rotate_pitch(rotate_yaw(q, cy, -sy), cp, -sp);
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
    PointCloud out;
    out.points.reserve(cloud.size());
    out.confidences = cloud.confidences;
    const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
    const double cp = std::cos(pose.pitch), sp = std::sin(pose.pitch);
    for (const Vec3& p : cloud.points) {
        out.points.push_back(rotate_yaw(rotate_pitch(p, cp, sp), cy, sy) + pose.position);
    }
    return out;
}

PointCloud inverse_transform_cloud(const PointCloud& cloud, const Pose& pose) {
    PointCloud out;
    out.points.reserve(cloud.size());
    out.confidences = cloud.confidences;
    for (const Vec3& p : cloud.points) {
        out.points.push_back(inverse_transform_point(p, pose));
    }
    return out;
}

PointCloud scale_cloud(const PointCloud& cloud, double factor) {
    PointCloud out;
    out.points.reserve(cloud.size());
    out.confidences = cloud.confidences;
    for (const Vec3& p : cloud.points) out.points.push_back(p * factor);
    return out;
}

bool FeatureVec::is_zero() const {
    for (double v : values)
        if (v != 0.0) return false;
    return true;
}

double FeatureVec::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

double cosine_similarity(const FeatureVec& f, const FeatureVec& g) {
    if (f.dim() != g.dim()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double dot = 0.0, nf = 0.0, ng = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        dot += f.values[i] * g.values[i];
        nf += f.values[i] * f.values[i];
        ng += g.values[i] * g.values[i];
    }
    if (nf == 0.0 || ng == 0.0) return 0.0;  // "no feature" sentinel
    return std::clamp(dot / (std::sqrt(nf) * std::sqrt(ng)), -1.0, 1.0);
}

double visual_similarity(const FeatureVec& f, const FeatureVec& g) {
    return (cosine_similarity(f, g) + 1.0) * 0.5;
}

VoxelIndex voxel_index_of(const Vec3& p, double voxel_size) {
    return {static_cast<int32_t>(std::floor(p.x / voxel_size)),
            static_cast<int32_t>(std::floor(p.y / voxel_size)),
            static_cast<int32_t>(std::floor(p.z / voxel_size))};
}

Vec3 voxel_center(const VoxelIndex& v, double voxel_size) {
    return {(v.x + 0.5) * voxel_size, (v.y + 0.5) * voxel_size, (v.z + 0.5) * voxel_size};
}

VoxelSet voxelize(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxelize: voxel_size must be > 0");
    VoxelSet set;
    set.voxel_size = voxel_size;
    set.occupied.reserve(cloud.size());
    for (const Vec3& p : cloud.points) set.occupied.insert(voxel_index_of(p, voxel_size));
    return set;
}

double voxel_iou(const VoxelSet& a, const VoxelSet& b) {
    if (a.voxel_size != b.voxel_size)
        throw std::invalid_argument("voxel_iou: mismatched voxel sizes");
    if (a.empty() && b.empty()) return 0.0;
    const VoxelSet& small = a.size() <= b.size() ? a : b;
    const VoxelSet& large = a.size() <= b.size() ? b : a;
    std::size_t inter = 0;
    for (const VoxelIndex& v : small.occupied)
        if (large.contains(v)) ++inter;
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace semnav
