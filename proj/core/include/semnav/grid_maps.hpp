#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/geometry.hpp"
#include "semnav/memory_bank.hpp"
#include "semnav/semantic_fusion.hpp"

namespace semnav {

// 2D rasters over the world metric frame. The origin is a fixed anchor: cell
// (0,0) always spans [origin, origin + cell_size) on both planar axes and
// indices may be negative. Growth moves only the integer window (off_x,
// off_z, width, height), never the anchor, so a world point maps to the same
// cell for the lifetime of the map and growth preserves states bit-exactly.

struct GridSpec {
    double cell_size = 0.1;  // meters
    Vec3 origin;             // anchor of cell (0,0), world metric frame
    int off_x = 0;           // window start, cells (x axis)
    int off_z = 0;           // window start, cells (z axis)
    int width = 0;           // window extent along x
    int height = 0;          // window extent along z

    bool operator==(const GridSpec& o) const {
        return cell_size == o.cell_size && origin == o.origin && off_x == o.off_x &&
               off_z == o.off_z && width == o.width && height == o.height;
    }
};

struct MapCell {
    int cx = 0;
    int cz = 0;
    bool operator==(const MapCell& o) const { return cx == o.cx && cz == o.cz; }
};

// floor((p - origin) / cell_size) on the planar axes.
MapCell world_to_cell(const GridSpec& spec, const Vec3& p);
// Center of the cell, y = origin.y. Round-trip cell -> world -> cell is identity.
Vec3 cell_to_world(const GridSpec& spec, const MapCell& cell);
bool in_bounds(const GridSpec& spec, const MapCell& cell);

enum class CellState : uint8_t { unknown = 0, free = 1, obstacle = 2 };

struct GridMaps {
    GridSpec spec;
    std::vector<CellState> obstacle;  // row-major, row = cz - off_z
    std::vector<uint8_t> explored;    // 1 = explored
    std::vector<double> value;        // [0, 1]

    std::size_t index(const MapCell& c) const {
        return static_cast<std::size_t>(c.cz - spec.off_z) * spec.width + (c.cx - spec.off_x);
    }
    // Out-of-window lookups: unknown / unexplored / zero value.
    CellState obstacle_at(const MapCell& c) const;
    bool explored_at(const MapCell& c) const;
    double value_at(const MapCell& c) const;
};

struct FrontierCluster {
    std::vector<MapCell> cells;  // row-major order
    Vec3 centroid;               // mean member cell center, world frame
    int size = 0;
};

// Projects keyframe clouds (perception units, scaled into metric) and store
// object clouds (already metric) onto co-registered rasters. Every point
// marks its cell explored; points whose height above the floor falls inside
// (height_min, height_max) mark it obstacle; explored cells without an
// obstacle mark are free. The window grows to cover all points. Throws
// std::runtime_error until the bank knows its metric scale.
GridMaps project_maps(const MemoryBank& bank, const ObjectStore& store, const GridSpec& spec,
                      double height_min, double height_max);

// Grows the window to cover p (states preserved); returns its cell.
MapCell ensure_covers(GridMaps& maps, const Vec3& p);
// Marks the cell of p explored and free unless it is a known obstacle.
void mark_traversed(GridMaps& maps, const Vec3& p);

// Frontier cell := free with at least one of its 8 neighbors an unknown
// raster cell (cells beyond the window are not raster cells and do not
// count, so a fully explored window has no frontiers). Cells are clustered
// by 8-connectivity; clusters below min_frontier_size are dropped; ordering
// is size descending, then centroid lexicographic on (x, z).
std::vector<FrontierCluster> detect_frontiers(const GridMaps& maps, int min_frontier_size = 3);

// Raster aligned to spec: each keyframe's points with confidence strictly
// above confidence_threshold paint the keyframe's value_score, composed with
// max across keyframes. Points outside the window are ignored. Throws
// std::runtime_error if any keyframe is unscored or (with keyframes present)
// the scale is unknown.
std::vector<double> build_value_map(const MemoryBank& bank, const GridSpec& spec,
                                    double confidence_threshold = 1.9);

// Grayscale exports (binary P5): obstacle 0 / free 255 / unknown 127;
// explored 255 / unknown 0; value scaled to [0, 255]. Header comments record
// the spec fields. Row 0 is the smallest z.
void write_obstacle_pgm(const GridMaps& maps, const std::string& path);
void write_explored_pgm(const GridMaps& maps, const std::string& path);
void write_value_pgm(const GridMaps& maps, const std::string& path);

// Composite view (binary P6): value heat over free space, obstacles red,
// frontier cells yellow, trajectory green, unknown dark gray.
void write_composite_ppm(const GridMaps& maps, const std::vector<FrontierCluster>& frontiers,
                         const std::vector<Vec3>& trajectory, const std::string& path);

}  // namespace semnav
