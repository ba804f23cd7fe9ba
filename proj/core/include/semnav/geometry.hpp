#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

namespace semnav {

// Frame conventions used throughout:
//  - world frame is y-up; x and z span the floor plane
//  - yaw is a right-handed rotation about +y, so the forward direction of a
//    pose with yaw p is (cos p, 0, -sin p); turning left increases yaw
//  - pitch is a right-handed rotation about the camera's lateral axis;
//    positive pitch looks up
//  - a pose maps camera-frame coordinates to world: R_yaw * R_pitch * p + t

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const;
    double squared_norm() const { return dot(*this); }
};

double distance(const Vec3& a, const Vec3& b);

inline double dot(const Vec3& a, const Vec3& b) { return a.dot(b); }

// Normalizes an angle to (-pi, pi].
double wrap_angle(double radians);

struct Pose {
    Vec3 position;
    double yaw = 0.0;    // radians, normalized to (-pi, pi]
    double pitch = 0.0;  // radians, clamped to [-pi/2, pi/2]

    Vec3 forward() const;  // unit horizontal heading (pitch ignored)
};

Pose make_pose(const Vec3& position, double yaw, double pitch = 0.0);

// Applies the pose's rotation then translation to a camera-frame point.
Vec3 transform_point(const Vec3& p, const Pose& pose);
// Inverse map: world-frame point back into the camera frame.
Vec3 inverse_transform_point(const Vec3& p, const Pose& pose);

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<double> confidences;  // one per point, finite, >= 0

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    void push_back(const Vec3& p, double confidence) {
        points.push_back(p);
        confidences.push_back(confidence);
    }
};

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);
PointCloud inverse_transform_cloud(const PointCloud& cloud, const Pose& pose);
PointCloud scale_cloud(const PointCloud& cloud, double factor);

struct FeatureVec {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool is_zero() const;
    double norm() const;
};

// Raw cosine similarity clamped to [-1, 1]; zero-norm inputs yield 0.
double cosine_similarity(const FeatureVec& f, const FeatureVec& g);
// Cosine remapped to [0, 1]: the form every similarity weight consumes.
double visual_similarity(const FeatureVec& f, const FeatureVec& g);

struct VoxelIndex {
    int32_t x = 0;
    int32_t y = 0;
    int32_t z = 0;
    bool operator==(const VoxelIndex& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelIndexHash {
    std::size_t operator()(const VoxelIndex& v) const {
        uint64_t h = 1469598103934665603ULL;
        for (int64_t c : {int64_t(v.x), int64_t(v.y), int64_t(v.z)}) {
            h ^= static_cast<uint64_t>(c);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

struct VoxelSet {
    double voxel_size = 0.0;
    std::unordered_set<VoxelIndex, VoxelIndexHash> occupied;

    std::size_t size() const { return occupied.size(); }
    bool empty() const { return occupied.empty(); }
    bool contains(const VoxelIndex& v) const { return occupied.count(v) != 0; }
};

VoxelIndex voxel_index_of(const Vec3& p, double voxel_size);
Vec3 voxel_center(const VoxelIndex& v, double voxel_size);

// Throws std::invalid_argument for non-positive voxel_size.
VoxelSet voxelize(const PointCloud& cloud, double voxel_size);

// |a n b| / |a u b|; 0 when both empty. Throws std::invalid_argument on
// mismatched voxel sizes.
double voxel_iou(const VoxelSet& a, const VoxelSet& b);

}  // namespace semnav
