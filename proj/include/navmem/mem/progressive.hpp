#pragma once

#include "navmem/enc/encoder.hpp"

#include <stdexcept>
#include <vector>

namespace navmem::mem {

// 2x2 mean-pool with floored output dims; grids whose next pooling would
// reach zero on any axis are dropped by the caller.
inline enc::TokenGrid downsample_2x2(const enc::TokenGrid& g) {
    enc::TokenGrid out;
    out.h_tok = g.h_tok / 2;
    out.w_tok = g.w_tok / 2;
    out.dim = g.dim;
    out.source_step = g.source_step;
    out.downsample_factor = g.downsample_factor * 2;
    out.tokens.assign(static_cast<std::size_t>(out.h_tok) * out.w_tok * g.dim, 0.0);
    for (int r = 0; r < out.h_tok; ++r)
        for (int c = 0; c < out.w_tok; ++c) {
            double* dst = out.token(r, c);
            const double* s00 = g.token(2 * r, 2 * c);
            const double* s01 = g.token(2 * r, 2 * c + 1);
            const double* s10 = g.token(2 * r + 1, 2 * c);
            const double* s11 = g.token(2 * r + 1, 2 * c + 1);
            for (int j = 0; j < g.dim; ++j) dst[j] = 0.25 * (s00[j] + s01[j] + s10[j] + s11[j]);
        }
    return out;
}

// Geometric token budget: ceil(K*S/3), the closed form of
// K*S/4 + K*S/16 + ... Stored counts never exceed it.
inline int progressive_budget(int k, int s) {
    if (k < 1 || s < 1) throw std::invalid_argument("progressive_budget: K and S must be >= 1");
    return (k * s + 2) / 3;
}

// History as groups of spatially compressed frame grids: group i holds at
// most K grids at linear factor 2^(i+1), newest group first, newest grid
// first within a group.
struct ProgressiveMemory {
    int group_size = 3;     // K
    int frame_tokens = 0;   // S of the uncompressed frames; set by first update
    std::vector<std::vector<enc::TokenGrid>> groups;

    int total_tokens() const {
        int n = 0;
        for (const auto& g : groups)
            for (const auto& grid : g) n += grid.count();
        return n;
    }

    int frame_count() const {
        int n = 0;
        for (const auto& g : groups) n += static_cast<int>(g.size());
        return n;
    }

    // Grids flattened oldest -> newest (deepest group's oldest first).
    std::vector<const enc::TokenGrid*> flatten_oldest_first() const {
        std::vector<const enc::TokenGrid*> out;
        for (auto git = groups.rbegin(); git != groups.rend(); ++git)
            for (auto it = git->rbegin(); it != git->rend(); ++it) out.push_back(&*it);
        return out;
    }
};

// Inserts a full-resolution frame: it enters group 0 at linear factor 2;
// each overflowing group demotes its oldest grid with a further 2x2 pool;
// grids that can no longer shrink are dropped.
inline ProgressiveMemory progressive_update(const ProgressiveMemory& mem, const enc::TokenGrid& new_frame) {
    if (new_frame.downsample_factor != 1)
        throw std::invalid_argument("progressive_update: new frame must be full resolution");
    ProgressiveMemory out = mem;
    if (out.frame_tokens == 0) out.frame_tokens = new_frame.count();
    else if (out.frame_tokens != new_frame.count())
        throw std::invalid_argument("progressive_update: frame token count changed mid-stream");

    enc::TokenGrid entering = downsample_2x2(new_frame);
    std::size_t group = 0;
    while (entering.h_tok > 0 && entering.w_tok > 0) {
        if (out.groups.size() <= group) out.groups.emplace_back();
        auto& g = out.groups[group];
        g.insert(g.begin(), std::move(entering));
        if (static_cast<int>(g.size()) <= out.group_size) break;
        enc::TokenGrid demoted = downsample_2x2(g.back());
        g.pop_back();
        entering = std::move(demoted);
        ++group;
    }
    while (!out.groups.empty() && out.groups.back().empty()) out.groups.pop_back();

    int budget = progressive_budget(out.group_size, out.frame_tokens);
    if (out.total_tokens() > budget)
        throw std::logic_error("progressive memory exceeded its token budget");  // unreachable by construction
    return out;
}

}  // namespace navmem::mem
