#include "semnav/semantic_fusion.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <unordered_map>

namespace semnav {

std::string SemanticObject::majority_category() const {
    std::string best;
    int best_votes = -1;
    for (const auto& [name, votes] : category_votes) {
        if (votes > best_votes || (votes == best_votes && name < best)) {
            best = name;
            best_votes = votes;
        }
    }
    return best;
}

PointCloud filter_confident_points(const Observation& obs, const Detection& det,
                                   double metric_scale, double threshold) {
    PointCloud out;
    for (int idx : det.point_indices) {
        if (idx < 0 || idx >= static_cast<int>(obs.cloud.size()))
            throw std::out_of_range("filter_confident_points: bad point index");
        if (obs.cloud.confidences[idx] > threshold)
            out.push_back(obs.cloud.points[idx] * metric_scale, obs.cloud.confidences[idx]);
    }
    return out;
}

namespace {

// order-independent voxel dedup: point = voxel center, confidence = max
PointCloud dedup_to_voxel_centers(const PointCloud& a, const PointCloud& b,
                                  double voxel_size) {
    std::unordered_map<VoxelIndex, double, VoxelIndexHash> cells;
    auto add = [&](const PointCloud& c) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            const VoxelIndex v = voxel_index_of(c.points[i], voxel_size);
            auto [it, fresh] = cells.try_emplace(v, c.confidences[i]);
            if (!fresh) it->second = std::max(it->second, c.confidences[i]);
        }
    };
    add(a);
    add(b);
    // deterministic ordering for serialization and comparison
    std::vector<std::pair<VoxelIndex, double>> sorted(cells.begin(), cells.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) {
        if (l.first.x != r.first.x) return l.first.x < r.first.x;
        if (l.first.y != r.first.y) return l.first.y < r.first.y;
        return l.first.z < r.first.z;
    });
    PointCloud out;
    out.points.reserve(sorted.size());
    for (const auto& [v, conf] : sorted) out.push_back(voxel_center(v, voxel_size), conf);
    return out;
}

}  // namespace

double association_score(const SemanticObject& existing, const PointCloud& new_cloud,
                         const FeatureVec& new_feature, const AssociationParams& p) {
    const double s_vis = visual_similarity(existing.mean_feature, new_feature);
    const double s_geo = voxel_iou(voxelize(existing.cloud, p.voxel_size),
                                   voxelize(new_cloud, p.voxel_size));
    return p.w1 * s_vis + p.w2 * s_geo;
}

int associate(const std::vector<SemanticObject>& store, const PointCloud& new_cloud,
              const FeatureVec& new_feature, const AssociationParams& p) {
    int best = -1;
    double best_score = 0.0;
    for (const SemanticObject& obj : store) {
        const double s = association_score(obj, new_cloud, new_feature, p);
        if (best < 0 || s > best_score ||
            (s == best_score && obj.id < store[best].id)) {
            // index of the best object within the store
            best = static_cast<int>(&obj - store.data());
            best_score = s;
        }
    }
    if (best < 0 || best_score < p.tau) {
#ifndef NDEBUG
        for (const SemanticObject& obj : store)
            assert(association_score(obj, new_cloud, new_feature, p) < p.tau);
#endif
        return -1;
    }
    return best;
}

void fuse(SemanticObject& obj, const PointCloud& new_cloud, const FeatureVec& new_feature,
          const std::string& category, const AssociationParams& p) {
    obj.cloud = dedup_to_voxel_centers(obj.cloud, new_cloud, p.voxel_size);
    const double n = static_cast<double>(obj.detection_count);
    if (obj.mean_feature.dim() != new_feature.dim())
        throw std::invalid_argument("fuse: feature dimension mismatch");
    for (std::size_t i = 0; i < obj.mean_feature.values.size(); ++i)
        obj.mean_feature.values[i] =
            (n * obj.mean_feature.values[i] + new_feature.values[i]) / (n + 1.0);
    obj.detection_count += 1;
    obj.category_votes[category] += 1;
    obj.confidence = static_cast<double>(obj.category_votes.at(obj.majority_category())) /
                     static_cast<double>(obj.detection_count);
}

SemanticObject make_object(int id, const PointCloud& cloud, const FeatureVec& feature,
                           const std::string& category, const AssociationParams& p) {
    SemanticObject obj;
    obj.id = id;
    obj.cloud = dedup_to_voxel_centers(cloud, PointCloud{}, p.voxel_size);
    obj.mean_feature = feature;
    obj.detection_count = 1;
    obj.category_votes[category] = 1;
    obj.confidence = 1.0;
    return obj;
}

std::vector<SemanticObject> query_goal_objects(const std::vector<SemanticObject>& store,
                                               const std::string& goal_category,
                                               double min_confidence) {
    std::vector<SemanticObject> out;
    for (const SemanticObject& obj : store)
        if (obj.majority_category() == goal_category && obj.confidence >= min_confidence)
            out.push_back(obj);
    std::sort(out.begin(), out.end(), [](const SemanticObject& a, const SemanticObject& b) {
        const double ka = a.confidence * a.detection_count;
        const double kb = b.confidence * b.detection_count;
        if (ka != kb) return ka > kb;
        return a.id < b.id;
    });
    return out;
}

int ObjectStore::ingest(const PointCloud& filtered_cloud, const FeatureVec& feature,
                        const std::string& category, const AssociationParams& p) {
    if (filtered_cloud.empty()) return -1;
    const int match = associate(objects, filtered_cloud, feature, p);
    if (match >= 0) {
        fuse(objects[match], filtered_cloud, feature, category, p);
        return objects[match].id;
    }
    objects.push_back(make_object(next_id++, filtered_cloud, feature, category, p));
    return objects.back().id;
}

}  // namespace semnav
