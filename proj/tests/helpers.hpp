#pragma once

#include <string>
#include <utility>
#include <vector>

#include "semnav/config.hpp"
#include "semnav/world.hpp"

namespace semnav::testutil {

// Drives observations through a fixed perception frame with zero drift.
struct Rig {
    World world;
    WorldParams wp;
    PerceptionFrame frame;
    DriftState drift;
    int next_frame = 0;

    explicit Rig(World w) : world(std::move(w)), drift(make_drift_state(world.seed, 1)) {}

    Observation shoot(double x, double z, double yaw, double pitch = 0.0) {
        const Pose cam = camera_pose(world, {x, 0.0, z}, yaw, pitch);
        if (next_frame == 0) frame.origin = cam.position;
        return observe(world, cam, drift, frame, next_frame++, wp);
    }
};

// Rectangular world: boundary walls, free interior.
inline World make_box_world(int rows, int cols, double cell_size = 0.25,
                            double scale_factor = 1.0) {
    World w;
    w.cell_size = cell_size;
    w.scale_factor = scale_factor;
    w.seed = 1;
    w.grid.assign(rows, std::string(cols, '.'));
    for (int c = 0; c < cols; ++c) {
        w.grid[0][c] = '#';
        w.grid[rows - 1][c] = '#';
    }
    for (int r = 0; r < rows; ++r) {
        w.grid[r][0] = '#';
        w.grid[r][cols - 1] = '#';
    }
    return w;
}

inline World make_world_from_rows(const std::vector<std::string>& rows,
                                  double cell_size = 0.25) {
    World w;
    w.cell_size = cell_size;
    w.grid = rows;
    w.seed = 1;
    return w;
}

}  // namespace semnav::testutil
