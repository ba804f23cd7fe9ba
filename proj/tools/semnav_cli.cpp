#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semnav/config.hpp"
#include "semnav/episode_runner.hpp"
#include "semnav/rng.hpp"
#include "semnav/world.hpp"

using nlohmann::json;
using namespace semnav;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

Config load_config_or_default(const std::string& path) {
    return path.empty() ? Config{} : load_config(path);
}

// "x,z,yaw_deg" -> floor position + heading
void parse_start(const std::string& text, Vec3& pos, double& yaw) {
    double x = 0.0, z = 0.0, deg = 0.0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &x, &z, &deg, &extra) != 3)
        throw CLI::ValidationError("--start", "expected x,z,yaw_deg");
    pos = {x, 0.0, z};
    yaw = wrap_angle(deg * kDegToRad);
}

Action parse_action(const std::string& name) {
    for (const Action a : {Action::move_forward, Action::turn_left, Action::turn_right,
                           Action::look_up, Action::look_down, Action::stop})
        if (name == action_name(a)) return a;
    throw std::runtime_error("unknown action '" + name + "'");
}

// paths inside manifests and scripts resolve against the file's directory
std::string resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).string();
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void print_result(const EpisodeResult& r) {
    std::cout << "status=" << status_name(r.status) << " steps=" << r.steps
              << " path_length=" << fmt(r.path_length)
              << " shortest_length=" << fmt(r.shortest_length)
              << " spl_term=" << fmt(spl_term(r)) << " dtg=" << fmt(r.dtg)
              << " collisions=" << r.collisions;
    if (r.context_used)
        std::cout << " context=" << (r.reloc_ok ? "relocalized" : "discarded");
    std::cout << "\n";
}

struct ManifestEpisode {
    std::string id;
    std::string world_label;  // as written in the manifest, for the CSV
    std::string world_path;   // resolved
    EpisodeSpec spec;
};

std::vector<ManifestEpisode> load_manifest(const std::string& path) {
    const json j = load_json(path);
    const auto base = std::filesystem::path(path).parent_path();
    if (!j.contains("episodes") || !j.at("episodes").is_array())
        throw std::runtime_error("manifest needs an 'episodes' array");
    std::vector<ManifestEpisode> out;
    for (const json& e : j.at("episodes")) {
        ManifestEpisode m;
        m.id = e.at("id").get<std::string>();
        m.world_label = e.at("world").get<std::string>();
        m.world_path = resolve(base, m.world_label);
        m.spec.goal_category = e.at("goal").get<std::string>();
        const auto& s = e.at("start");
        m.spec.start = {s.at(0).get<double>(), 0.0, s.at(1).get<double>()};
        m.spec.start_yaw = wrap_angle(s.at(2).get<double>() * kDegToRad);
        m.spec.seed = e.value("seed", uint64_t{0});
        m.spec.max_steps = e.value("max_steps", 300);
        m.spec.context_bank_path = resolve(base, e.value("context", std::string{}));
        out.push_back(std::move(m));
    }
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<ManifestEpisode>& eps,
                       const std::vector<EpisodeResult>& results) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw std::runtime_error("cannot write " + path);
    out << "episode_id,world,goal,success,steps,path_length,shortest_length,spl_term,dtg,"
           "status\n";
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const EpisodeResult& r = results[i];
        out << eps[i].id << ',' << eps[i].world_label << ',' << eps[i].spec.goal_category
            << ',' << (r.success ? 1 : 0) << ',' << r.steps << ',' << fmt(r.path_length)
            << ',' << fmt(r.shortest_length) << ',' << fmt(spl_term(r)) << ',' << fmt(r.dtg)
            << ',' << status_name(r.status) << '\n';
    }
    const MetricsSummary m = compute_metrics(results);
    out << "# averages over all episodes, failures included: sr=" << fmt(m.sr)
        << " spl=" << fmt(m.spl) << " mean_dtg=" << fmt(m.mean_dtg)
        << " mean_steps=" << fmt(m.mean_steps) << '\n';
}

// replays the actions, dropping the ones that would collide (they are pose
// no-ops), so self-recorded exploration runs make valid tour scripts
std::vector<Action> drop_collisions(const World& world, const Vec3& start, double yaw,
                                    const std::vector<Action>& actions,
                                    const EpisodeParams& ep) {
    std::vector<Action> clean;
    clean.reserve(actions.size());
    Pose pose = camera_pose(world, start, yaw);
    for (const Action a : actions) {
        const StepOutcome out = step_dynamics(world, pose, a, ep);
        if (out.collided) continue;
        pose = out.pose;
        clean.push_back(a);
    }
    return clean;
}

// "3-5" or "4" -> inclusive range
std::pair<int, int> parse_range(const std::string& text) {
    int lo = 0, hi = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%d-%d%c", &lo, &hi, &extra) == 2 && lo <= hi)
        return {lo, hi};
    if (std::sscanf(text.c_str(), "%d%c", &lo, &extra) == 1) return {lo, lo};
    throw CLI::ValidationError("--rooms", "expected N or LO-HI");
}

// "1..20" or "3,7,11" -> seed list
std::vector<uint64_t> parse_seeds(const std::string& text) {
    std::vector<uint64_t> seeds;
    unsigned long long lo = 0, hi = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%llu..%llu%c", &lo, &hi, &extra) == 2 && lo <= hi) {
        for (unsigned long long s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (std::sscanf(tok.c_str(), "%llu%c", &lo, &extra) != 1)
            throw CLI::ValidationError("--seeds", "expected A..B or a comma list");
        seeds.push_back(lo);
    }
    if (seeds.empty()) throw CLI::ValidationError("--seeds", "no seeds given");
    return seeds;
}

int cmd_run(const std::string& world_path, const std::string& goal, const std::string& start,
            int max_steps, const std::string& context, uint64_t seed,
            const std::string& render_dir, const std::string& config_path) {
    const Config cfg = load_config_or_default(config_path);
    const World world = load_world(world_path);
    EpisodeSpec spec;
    spec.goal_category = goal;
    parse_start(start, spec.start, spec.start_yaw);
    spec.max_steps = max_steps;
    spec.context_bank_path = context;
    spec.seed = seed;
    const EpisodeResult r = run_episode(world, spec, cfg);
    print_result(r);
    if (!render_dir.empty()) render_episode(r, render_dir);
    return r.success ? 0 : 1;
}

int cmd_batch(const std::string& suite, int jobs, const std::string& out_path,
              const std::string& config_path) {
    const Config cfg = load_config_or_default(config_path);
    const std::vector<ManifestEpisode> eps = load_manifest(suite);
    if (eps.empty()) throw std::runtime_error("manifest has no episodes");
    std::vector<EpisodeResult> results(eps.size());
    std::vector<std::string> errors(eps.size());
    std::atomic<std::size_t> cursor{0};
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(eps.size())));
    auto worker = [&]() {
        for (std::size_t i = cursor.fetch_add(1); i < eps.size(); i = cursor.fetch_add(1)) {
            try {
                const World world = load_world(eps[i].world_path);
                results[i] = run_episode(world, eps[i].spec, cfg);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < eps.size(); ++i)
        if (!errors[i].empty())
            throw std::runtime_error("episode " + eps[i].id + ": " + errors[i]);
    write_metrics_csv(out_path, eps, results);
    const MetricsSummary m = compute_metrics(results);
    std::cout << eps.size() << " episodes: sr=" << fmt(m.sr) << " spl=" << fmt(m.spl)
              << " mean_dtg=" << fmt(m.mean_dtg) << " mean_steps=" << fmt(m.mean_steps)
              << "\n";
    return 0;
}

int cmd_record_context(const std::string& world_path, const std::string& script_path,
                       const std::string& out_path, const std::string& config_path) {
    const Config cfg = load_config_or_default(config_path);
    const World world = load_world(world_path);
    const json script = load_json(script_path);
    const auto& s = script.at("start");
    const Vec3 start{s.at(0).get<double>(), 0.0, s.at(1).get<double>()};
    const double yaw = wrap_angle(s.at(2).get<double>() * kDegToRad);
    const uint64_t seed = script.value("seed", uint64_t{0});

    std::vector<Action> actions;
    if (script.contains("actions") == script.contains("auto_steps"))
        throw std::runtime_error("script needs exactly one of 'actions' or 'auto_steps'");
    if (script.contains("actions")) {
        for (const json& a : script.at("actions"))
            actions.push_back(parse_action(a.get<std::string>()));
    } else {
        // self-guided exploration: an episode with no goal walks the frontier
        EpisodeSpec spec;
        spec.start = start;
        spec.start_yaw = yaw;
        spec.max_steps = script.at("auto_steps").get<int>();
        spec.seed = seed;
        const EpisodeResult r = run_episode(world, spec, cfg);
        actions = drop_collisions(world, start, yaw, r.actions, cfg.episode);
    }
    const MemoryBank bank = record_context_video(world, start, yaw, actions, seed, cfg,
                                                 out_path);
    std::cout << "recorded " << bank.keyframes.size() << " keyframes over "
              << actions.size() << " actions to " << out_path << " (endpoint "
              << fmt(bank.endpoint_pose.position.x) << ','
              << fmt(bank.endpoint_pose.position.z) << ','
              << fmt(bank.endpoint_pose.yaw / kDegToRad) << ")\n";
    return 0;
}

int cmd_gen_worlds(const std::string& seeds_text, const std::string& rooms_text,
                   const std::string& out_dir) {
    const std::vector<uint64_t> seeds = parse_seeds(seeds_text);
    const auto [room_lo, room_hi] = parse_range(rooms_text);
    std::vector<std::string> categories;
    for (const CategorySpec& c : standard_categories()) categories.push_back(c.name);
    std::filesystem::create_directories(out_dir);
    for (const uint64_t seed : seeds) {
        SplitMix64 rng(mix_seed(seed, 0x726f6f6d73ULL));  // per-seed room count
        const int rooms = rng.range(room_lo, room_hi);
        const World w = generate_world(seed, rooms, categories);
        const std::string path =
            (std::filesystem::path(out_dir) / ("world_" + std::to_string(seed) + ".json"))
                .string();
        save_world(w, path);
        std::cout << path << " (" << rooms << " rooms, " << w.objects.size()
                  << " objects)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot object-goal navigation in synthetic worlds"};
    app.require_subcommand(1);

    std::string world_path, goal, start, context, render_dir, config_path;
    std::string suite, out_path, script_path, seeds_text, rooms_text = "3-5", out_dir;
    int max_steps = 300, jobs = 1;
    uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "run a single episode");
    run->add_option("--world", world_path, "world json file")->required();
    run->add_option("--goal", goal, "goal object category")->required();
    run->add_option("--start", start, "start pose as x,z,yaw_deg")->required();
    run->add_option("--max-steps", max_steps, "action budget");
    run->add_option("--context", context, "context bank archive to load");
    run->add_option("--seed", seed, "episode seed (drift stream)");
    run->add_option("--render-dir", render_dir, "write map renders here");
    run->add_option("--config", config_path, "config json overlay");

    CLI::App* batch = app.add_subcommand("batch", "run an episode suite");
    batch->add_option("--suite", suite, "episode manifest json")->required();
    batch->add_option("--jobs", jobs, "parallel workers");
    batch->add_option("--out", out_path, "metrics csv path")->required();
    batch->add_option("--config", config_path, "config json overlay");

    CLI::App* rec = app.add_subcommand("record-context", "replay a tour into a bank");
    rec->add_option("--world", world_path, "world json file")->required();
    rec->add_option("--script", script_path, "tour script json")->required();
    rec->add_option("--out", out_path, "bank archive path")->required();
    rec->add_option("--config", config_path, "config json overlay");

    CLI::App* gen = app.add_subcommand("gen-worlds", "generate synthetic worlds");
    gen->add_option("--seeds", seeds_text, "A..B or comma list")->required();
    gen->add_option("--rooms", rooms_text, "room count, N or LO-HI");
    gen->add_option("--out-dir", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(world_path, goal, start, max_steps, context, seed, render_dir,
                           config_path);
        if (batch->parsed()) return cmd_batch(suite, jobs, out_path, config_path);
        if (rec->parsed())
            return cmd_record_context(world_path, script_path, out_path, config_path);
        if (gen->parsed()) return cmd_gen_worlds(seeds_text, rooms_text, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
