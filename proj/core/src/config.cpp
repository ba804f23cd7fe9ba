#include "semnav/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace semnav {

namespace {

using nlohmann::json;

// Field table per section keeps the overlay / serialize pair in sync.
template <typename Section, typename Fn>
void for_each_field(Section& s, Fn&& fn);

template <typename Fn>
void for_each_field(WorldParams& s, Fn&& fn) {
    fn("rays_x", s.rays_x);
    fn("rays_y", s.rays_y);
    fn("fov_h_deg", s.fov_h_deg);
    fn("fov_v_deg", s.fov_v_deg);
    fn("max_range", s.max_range);
    fn("camera_height", s.camera_height);
    fn("confidence_gain", s.confidence_gain);
    fn("drift_position_std", s.drift_position_std);
    fn("drift_yaw_std_deg", s.drift_yaw_std_deg);
    fn("drift_pullback", s.drift_pullback);
    fn("min_subtend_deg", s.min_subtend_deg);
    fn("false_positives", s.false_positives);
    fn("feature_dim", s.feature_dim);
    fn("feature_noise_std", s.feature_noise_std);
}

template <typename Fn>
void for_each_field(ScaleParams& s, Fn&& fn) {
    fn("ransac_iterations", s.ransac_iterations);
    fn("ransac_tolerance", s.ransac_tolerance);
    fn("min_inlier_fraction", s.min_inlier_fraction);
    fn("ema_alpha", s.ema_alpha);
    fn("camera_height", s.camera_height);
    fn("min_up_normal", s.min_up_normal);
}

template <typename Fn>
void for_each_field(MemoryParams& s, Fn&& fn) {
    fn("keyframe_novelty", s.keyframe_novelty);
    fn("min_inlier_ratio", s.min_inlier_ratio);
    fn("reloc_yaw_step_deg", s.reloc_yaw_step_deg);
    fn("reloc_top_k", s.reloc_top_k);
    fn("capacity", s.capacity);
    fn("overlap_voxel_size", s.overlap_voxel_size);
}

template <typename Fn>
void for_each_field(FusionParams& s, Fn&& fn) {
    fn("w_visual", s.w_visual);
    fn("w_geometric", s.w_geometric);
    fn("tau", s.tau);
    fn("voxel_size", s.voxel_size);
    fn("confidence_threshold", s.confidence_threshold);
}

template <typename Fn>
void for_each_field(MapParams& s, Fn&& fn) {
    fn("cell_size", s.cell_size);
    fn("height_min", s.height_min);
    fn("height_max", s.height_max);
    fn("min_frontier_size", s.min_frontier_size);
}

template <typename Fn>
void for_each_field(HighPlannerParams& s, Fn&& fn) {
    fn("lambda_c", s.lambda_c);
    fn("lambda_v", s.lambda_v);
    fn("lambda_v_frontier", s.lambda_v_frontier);
    fn("lambda_s", s.lambda_s);
    fn("lambda_d", s.lambda_d);
    fn("theta_obj", s.theta_obj);
    fn("value_radius_cells", s.value_radius_cells);
    fn("unreachable_collisions", s.unreachable_collisions);
    fn("replan_period", s.replan_period);
    fn("reached_cells", s.reached_cells);
    fn("blacklist_ttl", s.blacklist_ttl);
    fn("blacklist_quant_cells", s.blacklist_quant_cells);
}

template <typename Fn>
void for_each_field(LowPlannerParams& s, Fn&& fn) {
    fn("unknown_speed", s.unknown_speed);
    fn("inflation_cells", s.inflation_cells);
    fn("heading_tolerance_deg", s.heading_tolerance_deg);
    fn("lookahead", s.lookahead);
    fn("stop_radius", s.stop_radius);
}

template <typename Fn>
void for_each_field(EpisodeParams& s, Fn&& fn) {
    fn("max_steps", s.max_steps);
    fn("forward_step", s.forward_step);
    fn("turn_deg", s.turn_deg);
    fn("context_spawn_radius", s.context_spawn_radius);
    fn("stop_margin", s.stop_margin);
}

template <typename Section>
void overlay_section(Section& section, const json& j, const std::string& prefix) {
    if (!j.is_object())
        throw std::runtime_error("config: section '" + prefix + "' must be an object");
    std::size_t seen = 0;
    for_each_field(section, [&](const char* key, auto& field) {
        auto it = j.find(key);
        if (it == j.end()) return;
        ++seen;
        try {
            field = it->template get<std::decay_t<decltype(field)>>();
        } catch (const json::exception&) {
            throw std::runtime_error("config: bad value type for '" + prefix + "." + key + "'");
        }
    });
    if (seen != j.size()) {
        // find the offending key for the message
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for_each_field(section, [&](const char* key, auto&) {
                if (it.key() == key) known = true;
            });
            if (!known)
                throw std::runtime_error("config: unknown key '" + prefix + "." + it.key() + "'");
        }
    }
}

template <typename Section>
json section_to_json(const Section& section) {
    json j = json::object();
    for_each_field(const_cast<Section&>(section),
                   [&](const char* key, auto& field) { j[key] = field; });
    return j;
}

struct SectionEntry {
    const char* name;
    void (*overlay)(Config&, const json&);
    json (*dump)(const Config&);
};

const SectionEntry kSections[] = {
    {"world", [](Config& c, const json& j) { overlay_section(c.world, j, "world"); },
     [](const Config& c) { return section_to_json(c.world); }},
    {"scale", [](Config& c, const json& j) { overlay_section(c.scale, j, "scale"); },
     [](const Config& c) { return section_to_json(c.scale); }},
    {"memory", [](Config& c, const json& j) { overlay_section(c.memory, j, "memory"); },
     [](const Config& c) { return section_to_json(c.memory); }},
    {"fusion", [](Config& c, const json& j) { overlay_section(c.fusion, j, "fusion"); },
     [](const Config& c) { return section_to_json(c.fusion); }},
    {"maps", [](Config& c, const json& j) { overlay_section(c.maps, j, "maps"); },
     [](const Config& c) { return section_to_json(c.maps); }},
    {"planner_high",
     [](Config& c, const json& j) { overlay_section(c.planner_high, j, "planner_high"); },
     [](const Config& c) { return section_to_json(c.planner_high); }},
    {"planner_low",
     [](Config& c, const json& j) { overlay_section(c.planner_low, j, "planner_low"); },
     [](const Config& c) { return section_to_json(c.planner_low); }},
    {"episode", [](Config& c, const json& j) { overlay_section(c.episode, j, "episode"); },
     [](const Config& c) { return section_to_json(c.episode); }},
};

}  // namespace

Config parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config: parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config: top level must be an object");

    Config config;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const SectionEntry* entry = nullptr;
        for (const SectionEntry& s : kSections)
            if (it.key() == s.name) entry = &s;
        if (!entry) throw std::runtime_error("config: unknown section '" + it.key() + "'");
        entry->overlay(config, it.value());
    }
    return config;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_to_json(const Config& config) {
    json j = json::object();
    for (const SectionEntry& s : kSections) j[s.name] = s.dump(config);
    return j.dump(2) + "\n";
}

void save_config(const Config& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << config_to_json(config);
}

}  // namespace semnav
