#pragma once

#include "navmem/enc/frame.hpp"
#include "navmem/env/world.hpp"

#include <stdexcept>
#include <vector>

namespace navmem::env {

enum class Action : int { forward = 0, left = 1, right = 2, stop = 3 };

inline const char* action_name(Action a) {
    switch (a) {
        case Action::forward: return "forward";
        case Action::left: return "left";
        case Action::right: return "right";
        case Action::stop: return "stop";
    }
    return "?";
}

inline char action_char(Action a) { return "FLRS"[static_cast<int>(a)]; }
inline Action action_from_char(char c) {
    switch (c) {
        case 'F': return Action::forward;
        case 'L': return Action::left;
        case 'R': return Action::right;
        case 'S': return Action::stop;
        default: throw std::invalid_argument(std::string("bad action character: ") + c);
    }
}

constexpr int kMaxEpisodeSteps = 500;

struct EnvState {
    Cell cell;
    Heading heading = Heading::N;
    int step_count = 0;
    bool done = false;
    std::vector<Cell> path_so_far;  // includes the start cell

    static EnvState initial(const GridWorld& w) {
        EnvState s;
        s.cell = w.start;
        s.heading = w.start_heading;
        s.path_so_far.push_back(w.start);
        return s;
    }
};

// Deterministic transition. Blocked forward is a no-op move (the step still
// counts); the 500-step cap forces done.
inline EnvState step(const GridWorld& w, const EnvState& state, Action action) {
    if (state.done) throw std::logic_error("env step: episode already done");
    EnvState next = state;
    switch (action) {
        case Action::forward: {
            int nx = state.cell.x + heading_dx(state.heading);
            int ny = state.cell.y + heading_dy(state.heading);
            if (!w.wall(nx, ny)) next.cell = {nx, ny};
            break;
        }
        case Action::left: next.heading = rotate_left(state.heading); break;
        case Action::right: next.heading = rotate_right(state.heading); break;
        case Action::stop: next.done = true; break;
    }
    next.step_count = state.step_count + 1;
    if (next.step_count >= kMaxEpisodeSteps) next.done = true;
    next.path_so_far.push_back(next.cell);
    return next;
}

struct ObsConfig {
    int view_cells = 8;  // forward depth of the egocentric window, in cells
    int cell_px = 4;     // rendered pixels per cell edge
};

namespace detail {

struct Color {
    double r, g, b;
};

inline Color cell_color(const GridWorld& w, int x, int y) {
    static const Color palette[9] = {
        {0.85, 0.10, 0.10}, {0.10, 0.25, 0.85}, {0.90, 0.85, 0.10}, {0.10, 0.80, 0.80},
        {0.85, 0.15, 0.80}, {0.95, 0.55, 0.10}, {0.55, 0.15, 0.85}, {0.95, 0.95, 0.95},
        {0.60, 0.35, 0.15}};
    if (w.wall(x, y)) return {0.60, 0.60, 0.60};
    if (w.goal.x == x && w.goal.y == y) return {0.05, 0.90, 0.10};
    if (const Landmark* l = w.landmark_at(x, y)) return palette[l->color - 1];
    return {0.10, 0.10, 0.10};
}

}  // namespace detail

// Egocentric forward-facing render. The window is view_cells deep (rows,
// agent row at the bottom) and view_cells wide (agent at lateral offset 0,
// column view_cells/2). Cells behind the first wall of a lateral column are
// occluded. Depth is an orthographic per-column ray-cast: every pixel of a
// lateral column carries the distance, in cells, to the first wall along
// the heading (view_cells if none is visible). Deterministic in
// (world, cell, heading); step_index is metadata only.
inline enc::ObservationFrame observe(const GridWorld& w, const EnvState& state,
                                     const ObsConfig& cfg = {}) {
    const int v = cfg.view_cells;
    const int px = cfg.cell_px;
    enc::ObservationFrame frame;
    frame.h = v * px;
    frame.w = v * px;
    frame.rgb.assign(static_cast<std::size_t>(frame.h) * frame.w * 3, 0.0);
    frame.depth.assign(static_cast<std::size_t>(frame.h) * frame.w, 0.0);
    frame.step_index = state.step_count;

    const int ax = heading_dx(state.heading), ay = heading_dy(state.heading);
    Heading right_h = rotate_right(state.heading);
    const int rx = heading_dx(right_h), ry = heading_dy(right_h);
    const detail::Color kOccluded{0.02, 0.02, 0.06};

    for (int lat = -v / 2; lat < v - v / 2; ++lat) {
        int col_block = lat + v / 2;
        // ray-cast depth for this lateral offset
        double d_val = static_cast<double>(v);
        for (int d = 0; d < v; ++d) {
            int cx = state.cell.x + d * ax + lat * rx;
            int cy = state.cell.y + d * ay + lat * ry;
            if (w.wall(cx, cy)) {
                d_val = static_cast<double>(d);
                break;
            }
        }
        bool occluded = false;
        for (int d = 0; d < v; ++d) {
            int cx = state.cell.x + d * ax + lat * rx;
            int cy = state.cell.y + d * ay + lat * ry;
            detail::Color c = occluded ? kOccluded : detail::cell_color(w, cx, cy);
            if (!occluded && w.wall(cx, cy)) occluded = true;
            int row_block = v - 1 - d;  // distance 0 at the bottom
            for (int pr = 0; pr < px; ++pr)
                for (int pc = 0; pc < px; ++pc) {
                    int r = row_block * px + pr;
                    int cpix = col_block * px + pc;
                    frame.rgb_at(r, cpix, 0) = c.r;
                    frame.rgb_at(r, cpix, 1) = c.g;
                    frame.rgb_at(r, cpix, 2) = c.b;
                    frame.depth_at(r, cpix) = d_val;
                }
        }
    }
    return frame;
}


}  // namespace navmem::env
