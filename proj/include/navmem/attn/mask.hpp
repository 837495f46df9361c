#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::attn {

// Half-open token range [begin, end).
struct Span {
    int begin = 0;
    int end = 0;
    int length() const { return end - begin; }
};

// Attention mask for a packed sequence: steps occupy consecutive token
// blocks, attention is causal within a block, and a step may additionally
// read listed earlier spans (shared memory/instruction prefixes).
//
// allowed(i, j) == j <= i && (same block || j inside a prefix span of i's block)
struct BlockSparseMask {
    std::vector<int> offsets;                     // block boundaries; first 0, last = total
    std::vector<std::vector<Span>> prefix_spans;  // per block, earlier spans it may read

    int total_tokens() const { return offsets.empty() ? 0 : offsets.back(); }
    int step_count() const { return static_cast<int>(offsets.size()) - 1; }

    int step_of(int token) const {
        for (int s = 0; s < step_count(); ++s)
            if (token >= offsets[static_cast<std::size_t>(s)] && token < offsets[static_cast<std::size_t>(s) + 1]) return s;
        throw std::out_of_range("mask: token " + std::to_string(token) + " outside packed sequence");
    }

    bool allowed(int i, int j) const {
        if (j > i) return false;
        int s = step_of(i);
        if (j >= offsets[static_cast<std::size_t>(s)]) return true;  // same block, causal
        for (const Span& sp : prefix_spans[static_cast<std::size_t>(s)])
            if (j >= sp.begin && j < sp.end) return true;
        return false;
    }
};

// `shared_prefix_spans` may be empty (disjoint causal blocks) or give one
// span list per step.
inline BlockSparseMask build_pack_mask(const std::vector<int>& step_lengths,
                                       const std::vector<std::vector<Span>>& shared_prefix_spans = {}) {
    if (step_lengths.empty()) throw std::invalid_argument("build_pack_mask: empty step list");
    if (!shared_prefix_spans.empty() && shared_prefix_spans.size() != step_lengths.size())
        throw std::invalid_argument("build_pack_mask: prefix span list count != step count");
    BlockSparseMask mask;
    mask.offsets.reserve(step_lengths.size() + 1);
    mask.offsets.push_back(0);
    for (int len : step_lengths) {
        if (len <= 0) throw std::invalid_argument("build_pack_mask: non-positive step length");
        mask.offsets.push_back(mask.offsets.back() + len);
    }
    mask.prefix_spans.assign(step_lengths.size(), {});
    for (std::size_t s = 0; s < shared_prefix_spans.size(); ++s) {
        for (const Span& sp : shared_prefix_spans[s]) {
            if (sp.begin < 0 || sp.end < sp.begin || sp.end > mask.offsets[s])
                throw std::invalid_argument("build_pack_mask: prefix span must lie before its step block");
            if (sp.length() > 0) mask.prefix_spans[s].push_back(sp);
        }
    }
    return mask;
}

}  // namespace navmem::attn
