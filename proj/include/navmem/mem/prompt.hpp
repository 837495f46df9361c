#pragma once

#include "navmem/attn/mask.hpp"
#include "navmem/mem/progressive.hpp"
#include "navmem/mem/recursive.hpp"

#include <stdexcept>
#include <vector>

namespace navmem::mem {

enum class SegmentKind { current_obs, memory, instruction, sentinel };

struct PromptSegment {
    SegmentKind kind;
    attn::Span span;
};

// Ordered prompt segments with index ranges that partition [0, total).
// Recursive mode uses exactly {f_t}, {m_pre}, {w}, {m_cur}; progressive
// mode has no sentinel segment and its memory segment holds the flattened
// compressed grids.
struct PromptLayout {
    std::vector<PromptSegment> segments;
    int total = 0;

    const PromptSegment* find(SegmentKind kind) const {
        for (const auto& s : segments)
            if (s.kind == kind) return &s;
        return nullptr;
    }

    attn::Span span_of(SegmentKind kind) const {
        const PromptSegment* s = find(kind);
        if (!s) throw std::out_of_range("prompt layout: segment not present");
        return s->span;
    }

    // Segments must tile [0, total) in order with no overlap.
    void validate() const {
        int cursor = 0;
        for (const auto& s : segments) {
            if (s.span.begin != cursor || s.span.end < s.span.begin)
                throw std::logic_error("prompt layout: segments do not partition the prompt");
            cursor = s.span.end;
        }
        if (cursor != total) throw std::logic_error("prompt layout: segments do not cover the prompt");
    }
};

namespace detail {

inline void push_segment(PromptLayout& layout, SegmentKind kind, int length) {
    layout.segments.push_back({kind, {layout.total, layout.total + length}});
    layout.total += length;
}

}  // namespace detail

// Progressive prompt: current observation, memory grids flattened
// oldest -> newest, then the instruction. Empty memory yields f_t then w.
inline PromptLayout assemble_progressive_prompt(int obs_tokens, const ProgressiveMemory& memory,
                                                int instruction_tokens) {
    PromptLayout layout;
    detail::push_segment(layout, SegmentKind::current_obs, obs_tokens);
    int mem_tokens = memory.total_tokens();
    if (mem_tokens > 0) detail::push_segment(layout, SegmentKind::memory, mem_tokens);
    detail::push_segment(layout, SegmentKind::instruction, instruction_tokens);
    layout.validate();
    return layout;
}

// Recursive prompt: {f_t}, {m_pre}, {w}, {m_cur}; both memory spans have
// length M, so the prompt length is independent of episode length.
inline PromptLayout assemble_recursive_prompt(int obs_tokens, int sentinel_count, int instruction_tokens) {
    if (sentinel_count < 1) throw std::invalid_argument("recursive prompt: sentinel count must be >= 1");
    PromptLayout layout;
    detail::push_segment(layout, SegmentKind::current_obs, obs_tokens);
    detail::push_segment(layout, SegmentKind::memory, sentinel_count);
    detail::push_segment(layout, SegmentKind::instruction, instruction_tokens);
    detail::push_segment(layout, SegmentKind::sentinel, sentinel_count);
    layout.validate();
    return layout;
}

}  // namespace navmem::mem
