#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/scale.hpp"
#include "semnav/world.hpp"

namespace semnav {

enum class KeyframeSource { live, context };

const char* keyframe_source_name(KeyframeSource s);

struct Keyframe {
    int id = 0;
    Pose pose;  // estimated pose in the perception frame
    PointCloud cloud;
    std::vector<Detection> detections;
    double value_score = 0.0;
    bool scored = false;
    KeyframeSource source = KeyframeSource::live;
};

// Keyframe clouds (and archives) hold float32 coordinates, so a bank built
// live and the same bank reloaded from disk are bit-identical.
PointCloud quantize_cloud_f32(const PointCloud& cloud);

struct MemoryBank {
    std::vector<Keyframe> keyframes;
    int next_id = 0;
    ScaleTracker tracker;
    bool scale_known = false;
    MetricScale metric_scale;       // valid iff scale_known
    std::string scored_category;    // set by score_keyframes
    bool has_endpoint = false;      // context tours record where they stopped
    Pose endpoint_pose;

    bool empty() const { return keyframes.empty(); }
    double scale_or_unit() const { return scale_known ? metric_scale.scale : 1.0; }
};

// Fraction of cloud points with a stored-cloud point within `radius`.
double cloud_overlap(const PointCloud& cloud, const PointCloud& stored, double radius);

// Inserts iff the bank is empty or the overlap against the most recent
// keyframe drops below 1 - keyframe_novelty. Each insertion re-estimates the
// metric scale from the new cloud and folds it into the EMA tracker.
std::optional<int> maybe_insert_keyframe(MemoryBank& bank, const Observation& obs,
                                         const Pose& pose, const MemoryParams& mem,
                                         const ScaleParams& scale,
                                         KeyframeSource source = KeyframeSource::live);

// maybe_insert_keyframe over a recorded sequence, tagged source=context.
// Value scores stay unset until score_keyframes runs with a goal.
int ingest_context_video(MemoryBank& bank, const std::vector<Observation>& frames,
                         const MemoryParams& mem, const ScaleParams& scale);

struct RelocResult {
    bool ok = false;
    Pose pose;                 // observation pose expressed in the bank frame
    double inlier_ratio = 0.0;
    int keyframe_id = -1;
};

// Candidate keyframes ranked by detection-category overlap (top reloc_top_k),
// aligned by a yaw grid at reloc_yaw_step_deg plus iterative refinement.
// Succeeds iff the best full-cloud inlier ratio exceeds min_inlier_ratio.
RelocResult relocalize(const MemoryBank& bank, const Observation& obs, const MemoryParams& mem);

// value_score = max over detections of the remapped cosine similarity against
// the goal-category embedding; keyframes without detections score 0.05.
void score_keyframes(MemoryBank& bank, const std::string& goal_category);

// Single-file archive: magic, JSON index, then per-keyframe blobs of
// little-endian float32 point triplets followed by float32 confidences.
void save_bank(const MemoryBank& bank, const std::string& path);
MemoryBank load_bank(const std::string& path);

}  // namespace semnav
