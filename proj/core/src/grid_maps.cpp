#include "semnav/grid_maps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace semnav {

MapCell world_to_cell(const GridSpec& spec, const Vec3& p) {
    return {static_cast<int>(std::floor((p.x - spec.origin.x) / spec.cell_size)),
            static_cast<int>(std::floor((p.z - spec.origin.z) / spec.cell_size))};
}

Vec3 cell_to_world(const GridSpec& spec, const MapCell& cell) {
    return {spec.origin.x + (cell.cx + 0.5) * spec.cell_size, spec.origin.y,
            spec.origin.z + (cell.cz + 0.5) * spec.cell_size};
}

bool in_bounds(const GridSpec& spec, const MapCell& cell) {
    return cell.cx >= spec.off_x && cell.cx < spec.off_x + spec.width &&
           cell.cz >= spec.off_z && cell.cz < spec.off_z + spec.height;
}

CellState GridMaps::obstacle_at(const MapCell& c) const {
    return in_bounds(spec, c) ? obstacle[index(c)] : CellState::unknown;
}

bool GridMaps::explored_at(const MapCell& c) const {
    return in_bounds(spec, c) && explored[index(c)] != 0;
}

double GridMaps::value_at(const MapCell& c) const {
    return in_bounds(spec, c) ? value[index(c)] : 0.0;
}

namespace {

struct Window {
    int off_x = 0, off_z = 0, width = 0, height = 0;

    void include(const MapCell& c) {
        if (width == 0) {
            off_x = c.cx;
            off_z = c.cz;
            width = height = 1;
            return;
        }
        const int max_x = std::max(off_x + width - 1, c.cx);
        const int max_z = std::max(off_z + height - 1, c.cz);
        off_x = std::min(off_x, c.cx);
        off_z = std::min(off_z, c.cz);
        width = max_x - off_x + 1;
        height = max_z - off_z + 1;
    }
};

void resize_window(GridMaps& maps, const Window& w) {
    GridSpec grown = maps.spec;
    grown.off_x = w.off_x;
    grown.off_z = w.off_z;
    grown.width = w.width;
    grown.height = w.height;
    GridMaps out;
    out.spec = grown;
    out.obstacle.assign(static_cast<std::size_t>(w.width) * w.height, CellState::unknown);
    out.explored.assign(out.obstacle.size(), 0);
    out.value.assign(out.obstacle.size(), 0.0);
    for (int cz = maps.spec.off_z; cz < maps.spec.off_z + maps.spec.height; ++cz) {
        for (int cx = maps.spec.off_x; cx < maps.spec.off_x + maps.spec.width; ++cx) {
            const MapCell c{cx, cz};
            const std::size_t src = maps.index(c);
            const std::size_t dst = out.index(c);
            out.obstacle[dst] = maps.obstacle[src];
            out.explored[dst] = maps.explored[src];
            out.value[dst] = maps.value[src];
        }
    }
    maps = std::move(out);
}

}  // namespace

GridMaps project_maps(const MemoryBank& bank, const ObjectStore& store, const GridSpec& spec,
                      double height_min, double height_max) {
    if (!bank.scale_known)
        throw std::runtime_error("project_maps: metric scale unknown");
    const double scale = bank.metric_scale.scale;
    const double floor_y = -bank.metric_scale.h_real;

    struct Mark {
        MapCell cell;
        bool obstacle;
    };
    std::vector<Mark> marks;
    const auto add_point = [&](const Vec3& metric) {
        const double h = metric.y - floor_y;
        marks.push_back({world_to_cell(spec, metric), h > height_min && h < height_max});
    };
    for (const Keyframe& kf : bank.keyframes)
        for (const Vec3& p : kf.cloud.points) add_point(p * scale);
    for (const SemanticObject& obj : store.objects)
        for (const Vec3& p : obj.cloud.points) add_point(p);

    Window w{spec.off_x, spec.off_z, spec.width, spec.height};
    for (const Mark& m : marks) w.include(m.cell);

    GridMaps maps;
    maps.spec = spec;
    maps.spec.off_x = w.off_x;
    maps.spec.off_z = w.off_z;
    maps.spec.width = w.width;
    maps.spec.height = w.height;
    maps.obstacle.assign(static_cast<std::size_t>(w.width) * w.height, CellState::unknown);
    maps.explored.assign(maps.obstacle.size(), 0);
    maps.value.assign(maps.obstacle.size(), 0.0);

    for (const Mark& m : marks) {
        const std::size_t i = maps.index(m.cell);
        maps.explored[i] = 1;
        if (m.obstacle) maps.obstacle[i] = CellState::obstacle;
    }
    for (std::size_t i = 0; i < maps.obstacle.size(); ++i)
        if (maps.explored[i] != 0 && maps.obstacle[i] != CellState::obstacle)
            maps.obstacle[i] = CellState::free;
    return maps;
}

MapCell ensure_covers(GridMaps& maps, const Vec3& p) {
    const MapCell c = world_to_cell(maps.spec, p);
    if (!in_bounds(maps.spec, c)) {
        Window w{maps.spec.off_x, maps.spec.off_z, maps.spec.width, maps.spec.height};
        w.include(c);
        resize_window(maps, w);
    }
    return c;
}

void mark_traversed(GridMaps& maps, const Vec3& p) {
    const MapCell c = ensure_covers(maps, p);
    const std::size_t i = maps.index(c);
    maps.explored[i] = 1;
    if (maps.obstacle[i] != CellState::obstacle) maps.obstacle[i] = CellState::free;
}

std::vector<FrontierCluster> detect_frontiers(const GridMaps& maps, int min_frontier_size) {
    const GridSpec& spec = maps.spec;
    const auto is_frontier = [&](const MapCell& c) {
        if (maps.obstacle_at(c) != CellState::free) return false;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dz == 0) continue;
                const MapCell n{c.cx + dx, c.cz + dz};
                if (in_bounds(spec, n) && maps.explored[maps.index(n)] == 0) return true;
            }
        return false;
    };

    std::vector<uint8_t> frontier(maps.obstacle.size(), 0);
    for (int cz = spec.off_z; cz < spec.off_z + spec.height; ++cz)
        for (int cx = spec.off_x; cx < spec.off_x + spec.width; ++cx)
            if (is_frontier({cx, cz})) frontier[maps.index({cx, cz})] = 1;

    std::vector<FrontierCluster> clusters;
    std::vector<uint8_t> seen(frontier.size(), 0);
    std::vector<MapCell> stack;
    for (int cz = spec.off_z; cz < spec.off_z + spec.height; ++cz) {
        for (int cx = spec.off_x; cx < spec.off_x + spec.width; ++cx) {
            const std::size_t i = maps.index({cx, cz});
            if (frontier[i] == 0 || seen[i] != 0) continue;
            FrontierCluster cluster;
            stack.assign(1, {cx, cz});
            seen[i] = 1;
            while (!stack.empty()) {
                const MapCell c = stack.back();
                stack.pop_back();
                cluster.cells.push_back(c);
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dz == 0) continue;
                        const MapCell n{c.cx + dx, c.cz + dz};
                        if (!in_bounds(spec, n)) continue;
                        const std::size_t j = maps.index(n);
                        if (frontier[j] == 0 || seen[j] != 0) continue;
                        seen[j] = 1;
                        stack.push_back(n);
                    }
            }
            if (static_cast<int>(cluster.cells.size()) < min_frontier_size) continue;
            std::sort(cluster.cells.begin(), cluster.cells.end(),
                      [](const MapCell& a, const MapCell& b) {
                          return a.cz != b.cz ? a.cz < b.cz : a.cx < b.cx;
                      });
            cluster.size = static_cast<int>(cluster.cells.size());
            Vec3 sum;
            for (const MapCell& c : cluster.cells) sum = sum + cell_to_world(spec, c);
            cluster.centroid = sum / static_cast<double>(cluster.size);
            clusters.push_back(std::move(cluster));
        }
    }
    std::sort(clusters.begin(), clusters.end(), [](const FrontierCluster& a, const FrontierCluster& b) {
        if (a.size != b.size) return a.size > b.size;
        if (a.centroid.x != b.centroid.x) return a.centroid.x < b.centroid.x;
        if (a.centroid.z != b.centroid.z) return a.centroid.z < b.centroid.z;
        const MapCell& ca = a.cells.front();
        const MapCell& cb = b.cells.front();
        return ca.cz != cb.cz ? ca.cz < cb.cz : ca.cx < cb.cx;
    });
    return clusters;
}

std::vector<double> build_value_map(const MemoryBank& bank, const GridSpec& spec,
                                    double confidence_threshold) {
    std::vector<double> value(static_cast<std::size_t>(spec.width) * spec.height, 0.0);
    if (bank.empty()) return value;
    for (const Keyframe& kf : bank.keyframes)
        if (!kf.scored)
            throw std::runtime_error("build_value_map: bank not scored for a goal");
    if (!bank.scale_known)
        throw std::runtime_error("build_value_map: metric scale unknown");
    const double scale = bank.metric_scale.scale;
    for (const Keyframe& kf : bank.keyframes) {
        for (std::size_t i = 0; i < kf.cloud.size(); ++i) {
            if (!(kf.cloud.confidences[i] > confidence_threshold)) continue;
            const MapCell c = world_to_cell(spec, kf.cloud.points[i] * scale);
            if (!in_bounds(spec, c)) continue;
            const std::size_t idx =
                static_cast<std::size_t>(c.cz - spec.off_z) * spec.width + (c.cx - spec.off_x);
            value[idx] = std::max(value[idx], kf.value_score);
        }
    }
    return value;
}

namespace {

void write_raster(const std::string& path, const GridSpec& spec, const char* magic,
                  int channels, const std::vector<uint8_t>& pixels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char header[256];
    std::snprintf(header, sizeof(header),
                  "%s\n# cell_size %.17g origin %.17g %.17g %.17g off %d %d\n%d %d\n255\n",
                  magic, spec.cell_size, spec.origin.x, spec.origin.y, spec.origin.z,
                  spec.off_x, spec.off_z, spec.width, spec.height);
    out << header;
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
    (void)channels;
}

}  // namespace

void write_obstacle_pgm(const GridMaps& maps, const std::string& path) {
    std::vector<uint8_t> px(maps.obstacle.size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = maps.obstacle[i] == CellState::obstacle ? 0
                : maps.obstacle[i] == CellState::free   ? 255
                                                        : 127;
    write_raster(path, maps.spec, "P5", 1, px);
}

void write_explored_pgm(const GridMaps& maps, const std::string& path) {
    std::vector<uint8_t> px(maps.explored.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = maps.explored[i] ? 255 : 0;
    write_raster(path, maps.spec, "P5", 1, px);
}

void write_value_pgm(const GridMaps& maps, const std::string& path) {
    std::vector<uint8_t> px(maps.value.size());
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = static_cast<uint8_t>(
            std::lround(std::clamp(maps.value[i], 0.0, 1.0) * 255.0));
    write_raster(path, maps.spec, "P5", 1, px);
}

namespace {

struct Rgb {
    uint8_t r, g, b;
};

Rgb heat_color(double v) {
    // piecewise jet ramp blended 65% over white
    const auto band = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const double r = band(1.5 - std::abs(4.0 * v - 3.0));
    const double g = band(1.5 - std::abs(4.0 * v - 2.0));
    const double b = band(1.5 - std::abs(4.0 * v - 1.0));
    const auto mix = [](double c) { return static_cast<uint8_t>(std::lround(255.0 * (0.35 + 0.65 * c))); };
    return {mix(r), mix(g), mix(b)};
}

}  // namespace

void write_composite_ppm(const GridMaps& maps, const std::vector<FrontierCluster>& frontiers,
                         const std::vector<Vec3>& trajectory, const std::string& path) {
    const GridSpec& spec = maps.spec;
    std::vector<uint8_t> px(static_cast<std::size_t>(spec.width) * spec.height * 3);
    const auto paint = [&](std::size_t i, Rgb c) {
        px[3 * i] = c.r;
        px[3 * i + 1] = c.g;
        px[3 * i + 2] = c.b;
    };
    for (std::size_t i = 0; i < maps.obstacle.size(); ++i) {
        if (maps.obstacle[i] == CellState::obstacle)
            paint(i, {220, 40, 40});
        else if (maps.obstacle[i] == CellState::free)
            paint(i, maps.value[i] > 0.0 ? heat_color(maps.value[i]) : Rgb{245, 245, 245});
        else
            paint(i, {40, 40, 40});
    }
    for (const FrontierCluster& cluster : frontiers)
        for (const MapCell& c : cluster.cells)
            if (in_bounds(spec, c)) paint(maps.index(c), {250, 220, 60});
    for (const Vec3& p : trajectory) {
        const MapCell c = world_to_cell(spec, p);
        if (in_bounds(spec, c)) paint(maps.index(c), {40, 160, 60});
    }
    write_raster(path, spec, "P6", 3, px);
}

}  // namespace semnav
