#include "semnav/memory_bank.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "semnav/rng.hpp"

namespace semnav {

namespace {

using nlohmann::json;

constexpr char kBankMagic[] = "semnavbank1\n";
constexpr std::size_t kMagicLen = sizeof(kBankMagic) - 1;
constexpr uint64_t kScaleSeedSalt = 0x5ca1eULL;

Vec3 yaw_rotate(const Vec3& p, double c, double s) {
    return {c * p.x + s * p.z, p.y, -s * p.x + c * p.z};
}

// The volatile store blocks g++ 11 from vectorizing adjacent components and
// folding the lossy double-float-double round trip away at -O3.
double round_f32(double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

// Uniform-bin hash over a point set; any point within `cell` of a query is
// guaranteed to sit in one of the 27 bins around the query's bin.
struct PointHash {
    double cell = 1.0;
    const std::vector<Vec3>* pts = nullptr;
    std::unordered_map<VoxelIndex, std::vector<int32_t>, VoxelIndexHash> bins;

    void build(const std::vector<Vec3>& points, double cell_size) {
        cell = cell_size;
        pts = &points;
        bins.clear();
        for (std::size_t i = 0; i < points.size(); ++i)
            bins[voxel_index_of(points[i], cell)].push_back(static_cast<int32_t>(i));
    }

    int nearest_within(const Vec3& q, double radius) const {
        const VoxelIndex c = voxel_index_of(q, cell);
        const double r2 = radius * radius;
        double best = r2;
        int best_idx = -1;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = bins.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == bins.end()) continue;
                    for (int32_t i : it->second) {
                        const double d2 = ((*pts)[i] - q).squared_norm();
                        if (d2 <= best) {
                            best = d2;
                            best_idx = i;
                        }
                    }
                }
        return best_idx;
    }

    bool has_within(const Vec3& q, double radius) const { return nearest_within(q, radius) >= 0; }
};

void score_keyframe(Keyframe& kf, const std::string& goal_category) {
    if (kf.detections.empty()) {
        kf.value_score = 0.05;
    } else {
        double best = 0.0;
        for (const Detection& d : kf.detections) {
            const FeatureVec emb =
                category_embedding(goal_category, static_cast<int>(d.feature.dim()));
            best = std::max(best, visual_similarity(d.feature, emb));
        }
        kf.value_score = best;
    }
    kf.scored = true;
}

}  // namespace

const char* keyframe_source_name(KeyframeSource s) {
    return s == KeyframeSource::live ? "live" : "context";
}

PointCloud quantize_cloud_f32(const PointCloud& cloud) {
    PointCloud out;
    out.points.reserve(cloud.size());
    out.confidences.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        out.points.push_back({round_f32(p.x), round_f32(p.y), round_f32(p.z)});
        out.confidences.push_back(round_f32(cloud.confidences[i]));
    }
    return out;
}

double cloud_overlap(const PointCloud& cloud, const PointCloud& stored, double radius) {
    if (cloud.empty()) return 1.0;
    if (stored.empty()) return 0.0;
    PointHash hash;
    hash.build(stored.points, radius);
    std::size_t matched = 0;
    for (const Vec3& p : cloud.points)
        if (hash.has_within(p, radius)) ++matched;
    return static_cast<double>(matched) / static_cast<double>(cloud.size());
}

std::optional<int> maybe_insert_keyframe(MemoryBank& bank, const Observation& obs,
                                         const Pose& pose, const MemoryParams& mem,
                                         const ScaleParams& scale, KeyframeSource source) {
    PointCloud qcloud = quantize_cloud_f32(obs.cloud);
    if (!bank.empty()) {
        // both clouds already live in the shared perception frame, so the
        // pose alignment is the identity here
        const double radius = mem.overlap_voxel_size / bank.scale_or_unit();
        const double overlap = cloud_overlap(qcloud, bank.keyframes.back().cloud, radius);
        if (overlap >= 1.0 - mem.keyframe_novelty) return std::nullopt;
    }

    Keyframe kf;
    kf.id = bank.next_id++;
    kf.pose = pose;
    kf.cloud = std::move(qcloud);
    kf.detections = obs.detections;
    kf.source = source;

    MetricScale est;
    if (estimate_scale(kf.cloud, scale, mix_seed(kScaleSeedSalt, static_cast<uint64_t>(kf.id)),
                       est)) {
        // a fit that disagrees wildly with the running estimate is a flat
        // surface mistaken for the floor, not a scale change
        const bool outlier =
            bank.scale_known && std::abs(est.scale / bank.tracker.smoothed - 1.0) > 0.5;
        if (!outlier) {
            bank.tracker.alpha = scale.ema_alpha;
            bank.tracker.update(est.scale);
            bank.metric_scale = est;
            bank.metric_scale.scale = bank.tracker.smoothed;
            bank.scale_known = true;
        }
    }
    if (!bank.scored_category.empty()) score_keyframe(kf, bank.scored_category);

    const int id = kf.id;
    bank.keyframes.push_back(std::move(kf));

    if (mem.capacity > 0 && static_cast<int>(bank.keyframes.size()) > mem.capacity) {
        auto victim = std::find_if(bank.keyframes.begin(), bank.keyframes.end(),
                                   [](const Keyframe& k) { return k.source == KeyframeSource::context; });
        if (victim == bank.keyframes.end()) victim = bank.keyframes.begin();
        bank.keyframes.erase(victim);
    }
    return id;
}

int ingest_context_video(MemoryBank& bank, const std::vector<Observation>& frames,
                         const MemoryParams& mem, const ScaleParams& scale) {
    int inserted = 0;
    for (const Observation& obs : frames)
        if (maybe_insert_keyframe(bank, obs, obs.estimated_pose, mem, scale,
                                  KeyframeSource::context))
            ++inserted;
    return inserted;
}

namespace {

struct Alignment {
    double yaw = 0.0;
    Vec3 t;
    int inliers = 0;
};

// One round of matched-pair refinement: translation from mean residual plus a
// closed-form in-plane rotation fit (y components are rotation-invariant).
bool refine_alignment(const std::vector<Vec3>& src, const PointHash& hash, double match_radius,
                      Alignment& a) {
    const double c = std::cos(a.yaw), s = std::sin(a.yaw);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    pairs.reserve(src.size());
    Vec3 sbar, mbar;
    for (const Vec3& p : src) {
        const Vec3 q = yaw_rotate(p, c, s) + a.t;
        const int j = hash.nearest_within(q, match_radius);
        if (j < 0) continue;
        const Vec3& m = (*hash.pts)[j];
        pairs.push_back({p, m});
        sbar = sbar + p;
        mbar = mbar + m;
    }
    if (pairs.size() < 20) return false;
    const double inv = 1.0 / static_cast<double>(pairs.size());
    sbar = sbar * inv;
    mbar = mbar * inv;
    double sxx = 0.0, sxz = 0.0;
    for (const auto& [p, m] : pairs) {
        const Vec3 u = p - sbar;
        const Vec3 v = m - mbar;
        sxx += v.x * u.x + v.z * u.z;
        sxz += v.x * u.z - v.z * u.x;
    }
    a.yaw = wrap_angle(std::atan2(sxz, sxx));
    a.t = mbar - yaw_rotate(sbar, std::cos(a.yaw), std::sin(a.yaw));
    return true;
}

int count_inliers(const std::vector<Vec3>& src, const PointHash& hash, double radius,
                  const Alignment& a) {
    const double c = std::cos(a.yaw), s = std::sin(a.yaw);
    int n = 0;
    for (const Vec3& p : src)
        if (hash.has_within(yaw_rotate(p, c, s) + a.t, radius)) ++n;
    return n;
}

}  // namespace

RelocResult relocalize(const MemoryBank& bank, const Observation& obs, const MemoryParams& mem) {
    RelocResult res;
    if (bank.empty() || obs.cloud.empty()) return res;

    const double scale = bank.scale_or_unit();
    const double h_real = bank.scale_known ? bank.metric_scale.h_real : 0.88;
    const double inlier_radius = mem.overlap_voxel_size / scale;
    const double match_radius = 2.0 * inlier_radius;
    // the floor is featureless and matches itself under any planar shift, so
    // alignment and the inlier ratio run on structure above it
    const double floor_cut = (-h_real + 0.3) / scale;

    // camera-frame points with pitch pre-applied: only yaw and translation
    // remain unknown
    const Pose est = obs.estimated_pose;
    const Pose pitch_only = make_pose({0.0, 0.0, 0.0}, 0.0, est.pitch);
    const PointCloud qcloud = quantize_cloud_f32(obs.cloud);
    std::vector<Vec3> src_struct;
    src_struct.reserve(qcloud.size());
    for (const Vec3& p : qcloud.points) {
        if (p.y <= floor_cut) continue;
        src_struct.push_back(transform_point(inverse_transform_point(p, est), pitch_only));
    }
    if (src_struct.size() < 30) return res;

    // the acceptance ratio runs on feature-bearing points only: bare walls
    // align onto any other wall, detections do not
    std::unordered_set<int> det_idx;
    for (const Detection& d : obs.detections)
        det_idx.insert(d.point_indices.begin(), d.point_indices.end());
    std::vector<Vec3> src_sem;
    src_sem.reserve(det_idx.size());
    for (int i : det_idx) {
        const Vec3& p = qcloud.points[i];
        if (p.y <= floor_cut) continue;
        src_sem.push_back(transform_point(inverse_transform_point(p, est), pitch_only));
    }
    if (src_sem.size() < 10) return res;

    const std::size_t stride = std::max<std::size_t>(1, src_struct.size() / 600);
    std::vector<Vec3> src;
    for (std::size_t i = 0; i < src_struct.size(); i += stride) src.push_back(src_struct[i]);

    // candidates: keyframes sharing the most detection categories, older first
    std::unordered_set<std::string> obs_cats;
    for (const Detection& d : obs.detections) obs_cats.insert(d.category);
    std::vector<std::pair<int, int>> ranked;
    for (std::size_t i = 0; i < bank.keyframes.size(); ++i) {
        std::unordered_set<std::string> shared;
        for (const Detection& d : bank.keyframes[i].detections)
            if (obs_cats.count(d.category)) shared.insert(d.category);
        ranked.push_back({-static_cast<int>(shared.size()), static_cast<int>(i)});
    }
    std::sort(ranked.begin(), ranked.end());
    if (static_cast<int>(ranked.size()) > mem.reloc_top_k) ranked.resize(mem.reloc_top_k);

    const double yaw_step = mem.reloc_yaw_step_deg * M_PI / 180.0;
    const int yaw_count = std::max(1, static_cast<int>(std::lround(2.0 * M_PI / yaw_step)));

    Alignment best;
    int best_kf = -1;
    double best_ratio = 0.0;

    for (const auto& [neg_shared, ki] : ranked) {
        (void)neg_shared;
        const Keyframe& kf = bank.keyframes[ki];
        std::vector<Vec3> target;
        target.reserve(kf.cloud.size());
        for (const Vec3& p : kf.cloud.points)
            if (p.y > floor_cut) target.push_back(p);
        if (target.size() < 30) continue;
        PointHash hash;
        hash.build(target, match_radius);

        // coarse yaw sweep, single translation update each
        std::vector<Alignment> coarse;
        for (int k = 0; k < yaw_count; ++k) {
            Alignment a;
            a.yaw = wrap_angle(kf.pose.yaw + k * yaw_step);
            a.t = kf.pose.position;
            const double c = std::cos(a.yaw), s = std::sin(a.yaw);
            Vec3 residual;
            int matched = 0;
            for (const Vec3& p : src) {
                const Vec3 q = yaw_rotate(p, c, s) + a.t;
                const int j = hash.nearest_within(q, match_radius);
                if (j < 0) continue;
                residual = residual + ((*hash.pts)[j] - q);
                ++matched;
            }
            if (matched < 20) continue;
            a.t = a.t + residual / static_cast<double>(matched);
            a.inliers = count_inliers(src, hash, inlier_radius, a);
            coarse.push_back(a);
        }
        std::sort(coarse.begin(), coarse.end(),
                  [](const Alignment& l, const Alignment& r) { return l.inliers > r.inliers; });
        if (coarse.size() > 3) coarse.resize(3);

        for (Alignment a : coarse) {
            bool ok = true;
            for (int it = 0; it < 4 && ok; ++it) ok = refine_alignment(src, hash, match_radius, a);
            if (!ok) continue;
            const int sem = count_inliers(src_sem, hash, inlier_radius, a);
            const double ratio = static_cast<double>(sem) / static_cast<double>(src_sem.size());
            if (ratio > best_ratio) {
                best_ratio = ratio;
                best = a;
                best_kf = kf.id;
            }
        }
    }

    if (best_kf < 0 || best_ratio <= mem.min_inlier_ratio) return res;
    res.ok = true;
    res.inlier_ratio = best_ratio;
    res.keyframe_id = best_kf;
    res.pose = make_pose(best.t, best.yaw, est.pitch);
    return res;
}

void score_keyframes(MemoryBank& bank, const std::string& goal_category) {
    if (find_category(goal_category) == nullptr)
        throw std::invalid_argument("score_keyframes: unknown category '" + goal_category + "'");
    for (Keyframe& kf : bank.keyframes) score_keyframe(kf, goal_category);
    bank.scored_category = goal_category;
}

namespace {

json pose_to_json(const Pose& p) {
    return json{{"position", {p.position.x, p.position.y, p.position.z}},
                {"yaw", p.yaw},
                {"pitch", p.pitch}};
}

Pose pose_from_json(const json& j) {
    Pose p;
    const auto& v = j.at("position");
    p.position = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
    p.yaw = j.at("yaw").get<double>();
    p.pitch = j.at("pitch").get<double>();
    return p;
}

void append_f32(std::string& buf, double v) {
    static_assert(std::endian::native == std::endian::little, "archive format is little-endian");
    const float f = static_cast<float>(v);
    char raw[4];
    std::memcpy(raw, &f, 4);
    buf.append(raw, 4);
}

double read_f32(const std::string& buf, std::size_t offset) {
    float f;
    std::memcpy(&f, buf.data() + offset, 4);
    return static_cast<double>(f);
}

}  // namespace

void save_bank(const MemoryBank& bank, const std::string& path) {
    json index;
    index["format"] = 1;
    index["next_id"] = bank.next_id;
    index["scale_known"] = bank.scale_known;
    if (bank.scale_known)
        index["metric_scale"] = {{"scale", bank.metric_scale.scale},
                                 {"h_ground", bank.metric_scale.h_ground},
                                 {"h_real", bank.metric_scale.h_real}};
    index["tracker"] = {{"alpha", bank.tracker.alpha},
                        {"initialized", bank.tracker.initialized},
                        {"smoothed", bank.tracker.smoothed}};
    index["scored_category"] = bank.scored_category;
    index["has_endpoint"] = bank.has_endpoint;
    if (bank.has_endpoint) index["endpoint"] = pose_to_json(bank.endpoint_pose);

    std::string blobs;
    json kfs = json::array();
    for (const Keyframe& kf : bank.keyframes) {
        json jk;
        jk["id"] = kf.id;
        jk["pose"] = pose_to_json(kf.pose);
        jk["value_score"] = kf.value_score;
        jk["scored"] = kf.scored;
        jk["source"] = keyframe_source_name(kf.source);
        json dets = json::array();
        for (const Detection& d : kf.detections)
            dets.push_back({{"category", d.category},
                            {"confidence", d.detector_confidence},
                            {"feature", d.feature.values},
                            {"points", d.point_indices}});
        jk["detections"] = std::move(dets);
        jk["point_count"] = kf.cloud.size();
        jk["blob_offset"] = blobs.size();
        for (const Vec3& p : kf.cloud.points) {
            append_f32(blobs, p.x);
            append_f32(blobs, p.y);
            append_f32(blobs, p.z);
        }
        for (double c : kf.cloud.confidences) append_f32(blobs, c);
        kfs.push_back(std::move(jk));
    }
    index["keyframes"] = std::move(kfs);

    const std::string text = index.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_bank: cannot open '" + path + "'");
    out.write(kBankMagic, static_cast<std::streamsize>(kMagicLen));
    const uint64_t len = text.size();
    char raw[8];
    std::memcpy(raw, &len, 8);
    out.write(raw, 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
    if (!out) throw std::runtime_error("save_bank: write failed for '" + path + "'");
}

MemoryBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_bank: cannot open '" + path + "'");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < kMagicLen + 8 || data.compare(0, kMagicLen, kBankMagic) != 0)
        throw std::runtime_error("load_bank: '" + path + "' is not a bank archive");
    uint64_t len = 0;
    std::memcpy(&len, data.data() + kMagicLen, 8);
    const std::size_t blob_start = kMagicLen + 8 + len;
    if (blob_start > data.size())
        throw std::runtime_error("load_bank: truncated index in '" + path + "'");

    json index;
    try {
        index = json::parse(data.substr(kMagicLen + 8, len));
    } catch (const json::exception& e) {
        throw std::runtime_error("load_bank: bad index in '" + path + "': " + e.what());
    }

    MemoryBank bank;
    try {
        bank.next_id = index.at("next_id").get<int>();
        bank.scale_known = index.at("scale_known").get<bool>();
        if (bank.scale_known) {
            const json& ms = index.at("metric_scale");
            bank.metric_scale.scale = ms.at("scale").get<double>();
            bank.metric_scale.h_ground = ms.at("h_ground").get<double>();
            bank.metric_scale.h_real = ms.at("h_real").get<double>();
        }
        const json& tr = index.at("tracker");
        bank.tracker.alpha = tr.at("alpha").get<double>();
        bank.tracker.initialized = tr.at("initialized").get<bool>();
        bank.tracker.smoothed = tr.at("smoothed").get<double>();
        bank.scored_category = index.at("scored_category").get<std::string>();
        bank.has_endpoint = index.at("has_endpoint").get<bool>();
        if (bank.has_endpoint) bank.endpoint_pose = pose_from_json(index.at("endpoint"));

        for (const json& jk : index.at("keyframes")) {
            Keyframe kf;
            kf.id = jk.at("id").get<int>();
            kf.pose = pose_from_json(jk.at("pose"));
            kf.value_score = jk.at("value_score").get<double>();
            kf.scored = jk.at("scored").get<bool>();
            kf.source = jk.at("source").get<std::string>() == "context" ? KeyframeSource::context
                                                                        : KeyframeSource::live;
            for (const json& jd : jk.at("detections")) {
                Detection d;
                d.category = jd.at("category").get<std::string>();
                d.detector_confidence = jd.at("confidence").get<double>();
                d.feature.values = jd.at("feature").get<std::vector<double>>();
                d.point_indices = jd.at("points").get<std::vector<int>>();
                kf.detections.push_back(std::move(d));
            }
            const std::size_t count = jk.at("point_count").get<std::size_t>();
            std::size_t offset = blob_start + jk.at("blob_offset").get<std::size_t>();
            if (offset + count * 16 > data.size())
                throw std::runtime_error("load_bank: truncated blobs in '" + path + "'");
            kf.cloud.points.reserve(count);
            kf.cloud.confidences.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                const Vec3 p{read_f32(data, offset), read_f32(data, offset + 4),
                             read_f32(data, offset + 8)};
                kf.cloud.points.push_back(p);
                offset += 12;
            }
            for (std::size_t i = 0; i < count; ++i) {
                kf.cloud.confidences.push_back(read_f32(data, offset));
                offset += 4;
            }
            bank.keyframes.push_back(std::move(kf));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("load_bank: bad index in '" + path + "': " + e.what());
    }
    return bank;
}

}  // namespace semnav
