#pragma once

#include <map>
#include <string>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/world.hpp"

namespace semnav {

// Persistent semantic object store: confidence-filtered detection clouds are
// associated to existing objects by a weighted visual+geometric score and
// fused by voxel union and running-mean features.
//
// Object clouds live in the world metric frame and are kept deduplicated at
// voxel resolution (points are voxel centers, confidence is the max of the
// contributors), which makes the fused state independent of fusion order.

struct SemanticObject {
    int id = 0;
    std::map<std::string, int> category_votes;
    PointCloud cloud;          // voxel-center representation, metric frame
    FeatureVec mean_feature;   // arithmetic mean of contributing features
    int detection_count = 0;
    double confidence = 0.0;   // majority votes / detection_count

    std::string majority_category() const;
};

struct AssociationParams {
    double w1 = 0.5;          // visual weight
    double w2 = 0.5;          // geometric weight
    double tau = 0.55;        // scores below this start a new object
    double voxel_size = 0.1;  // meters

    static AssociationParams from(const FusionParams& f) {
        return {f.w_visual, f.w_geometric, f.tau, f.voxel_size};
    }
};

// Points of one detection with confidence strictly above the threshold,
// scaled from perception units into the world metric frame. An empty result
// means the detection carries no usable geometry and is dropped.
PointCloud filter_confident_points(const Observation& obs, const Detection& det,
                                   double metric_scale, double threshold = 1.9);

// w1 * S_vis + w2 * S_geo; S_vis is the [0,1]-remapped cosine between the
// object's mean feature and the new feature, S_geo the voxel IoU.
double association_score(const SemanticObject& existing, const PointCloud& new_cloud,
                         const FeatureVec& new_feature, const AssociationParams& p);

// Index of the best-scoring object when its score reaches tau (a score equal
// to tau associates); -1 when a new object should be created. Ties go to the
// lowest id.
int associate(const std::vector<SemanticObject>& store, const PointCloud& new_cloud,
              const FeatureVec& new_feature, const AssociationParams& p);

// Union the clouds at voxel resolution, push the feature into the running
// mean, count the category vote, refresh the majority confidence.
void fuse(SemanticObject& obj, const PointCloud& new_cloud, const FeatureVec& new_feature,
          const std::string& category, const AssociationParams& p);

SemanticObject make_object(int id, const PointCloud& cloud, const FeatureVec& feature,
                           const std::string& category, const AssociationParams& p);

// Objects whose majority category matches, at or above min_confidence,
// best (confidence * detection_count) first, ties by id.
std::vector<SemanticObject> query_goal_objects(const std::vector<SemanticObject>& store,
                                               const std::string& goal_category,
                                               double min_confidence);

// Convenience wrapper used by the episode loop and the context-bank replay.
struct ObjectStore {
    std::vector<SemanticObject> objects;
    int next_id = 0;

    // associate-or-create; returns the id touched, or -1 if the filtered
    // cloud was empty and the detection was dropped
    int ingest(const PointCloud& filtered_cloud, const FeatureVec& feature,
               const std::string& category, const AssociationParams& p);
};

}  // namespace semnav
