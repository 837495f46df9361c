#pragma once

#include "navmem/env/sim.hpp"
#include "navmem/env/world.hpp"

#include <deque>
#include <stdexcept>
#include <vector>

namespace navmem::env {

// Shortest action-distance table over the (cell, heading) graph: forward
// costs 1, each 90-degree rotation costs 1. Distance 0 at the goal cell for
// every heading. Built once per world by BFS from the goal over reversed
// edges.
class OracleTable {
public:
    static OracleTable build(const GridWorld& w) {
        OracleTable t;
        t.width_ = w.width;
        t.height_ = w.height;
        t.dist_.assign(static_cast<std::size_t>(w.width) * w.height * 4, -1);
        std::deque<std::pair<Cell, Heading>> queue;
        for (int h = 0; h < 4; ++h) {
            t.at(w.goal.x, w.goal.y, static_cast<Heading>(h)) = 0;
            queue.push_back({w.goal, static_cast<Heading>(h)});
        }
        while (!queue.empty()) {
            auto [cell, heading] = queue.front();
            queue.pop_front();
            int d = t.at(cell.x, cell.y, heading);
            auto relax = [&](Cell c, Heading h) {
                if (w.wall(c.x, c.y)) return;
                int& slot = t.at(c.x, c.y, h);
                if (slot >= 0) return;
                slot = d + 1;
                queue.push_back({c, h});
            };
            // predecessors by rotation: rotating from h' lands in `heading`
            relax(cell, rotate_right(heading));  // left-rotation predecessor
            relax(cell, rotate_left(heading));   // right-rotation predecessor
            // predecessor by forward move into `cell`
            relax({cell.x - heading_dx(heading), cell.y - heading_dy(heading)}, heading);
        }
        return t;
    }

    int distance(int x, int y, Heading h) const {
        if (x < 0 || x >= width_ || y < 0 || y >= height_) return -1;
        return dist_[(static_cast<std::size_t>(y) * width_ + x) * 4 + static_cast<int>(h)];
    }

    int distance(const EnvState& s) const { return distance(s.cell.x, s.cell.y, s.heading); }

private:
    int& at(int x, int y, Heading h) { return dist_[(static_cast<std::size_t>(y) * width_ + x) * 4 + static_cast<int>(h)]; }

    int width_ = 0, height_ = 0;
    std::vector<int> dist_;
};

// First action of a shortest action-sequence to the goal; `stop` at the
// goal cell. Tie-break follows the fixed action order forward < left <
// right.
inline Action oracle_action(const GridWorld& w, const OracleTable& t, const EnvState& state) {
    if (state.done) throw std::logic_error("oracle_action: episode already done");
    if (state.cell == w.goal) return Action::stop;
    int here = t.distance(state);
    if (here < 0) throw std::runtime_error("oracle_action: goal unreachable from state");
    // forward
    {
        int nx = state.cell.x + heading_dx(state.heading);
        int ny = state.cell.y + heading_dy(state.heading);
        if (!w.wall(nx, ny) && t.distance(nx, ny, state.heading) == here - 1) return Action::forward;
    }
    if (t.distance(state.cell.x, state.cell.y, rotate_left(state.heading)) == here - 1) return Action::left;
    if (t.distance(state.cell.x, state.cell.y, rotate_right(state.heading)) == here - 1) return Action::right;
    throw std::runtime_error("oracle_action: no improving action (corrupt distance table)");
}

// Full oracle action sequence from `state` up to and including `stop`.
inline std::vector<Action> oracle_rollout(const GridWorld& w, const OracleTable& t, EnvState state,
                                          int max_actions = kMaxEpisodeSteps) {
    std::vector<Action> actions;
    for (int i = 0; i < max_actions; ++i) {
        Action a = oracle_action(w, t, state);
        actions.push_back(a);
        if (a == Action::stop) break;
        state = step(w, state, a);
    }
    return actions;
}

// The next `horizon` oracle actions from `state`, advancing a scratch copy
// of the environment and reverting nothing in the caller's state. Once the
// oracle stops, the remaining labels are `stop`.
inline std::vector<Action> oracle_plan(const GridWorld& w, const OracleTable& t, EnvState state, int horizon) {
    std::vector<Action> plan;
    plan.reserve(static_cast<std::size_t>(horizon));
    bool stopped = false;
    for (int i = 0; i < horizon; ++i) {
        if (stopped || state.done) {
            plan.push_back(Action::stop);
            continue;
        }
        Action a = oracle_action(w, t, state);
        plan.push_back(a);
        if (a == Action::stop) stopped = true;
        else state = step(w, state, a);
    }
    return plan;
}

}  // namespace navmem::env
