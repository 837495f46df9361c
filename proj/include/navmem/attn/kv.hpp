#pragma once

#include "navmem/ad/tensor.hpp"
#include "navmem/attn/mask.hpp"

#include <stdexcept>
#include <vector>

namespace navmem::attn {

enum class Segment { current_obs, memory, instruction, sentinel };

// Per-layer key/value blocks for an attention stack. Head h of a position
// lives in columns [h*head_dim, (h+1)*head_dim) of the row. Segment labels
// are shared across layers; position i is row i.
struct KVCache {
    struct LayerKV {
        ad::Tensor k;  // [T x heads*head_dim]
        ad::Tensor v;  // [T x heads*head_dim]
    };

    int heads = 1;
    int head_dim = 0;
    std::vector<Segment> segments;
    std::vector<LayerKV> layers;

    KVCache() = default;
    KVCache(int n_layers, int n_heads, int dim_per_head) : heads(n_heads), head_dim(dim_per_head) {
        layers.resize(static_cast<std::size_t>(n_layers));
        for (auto& l : layers) {
            l.k = ad::Tensor::zeros({0, heads * head_dim});
            l.v = ad::Tensor::zeros({0, heads * head_dim});
        }
    }

    int positions() const { return layers.empty() ? 0 : layers[0].k.rows(); }

    // Appends `labels.size()` new positions; k/v carry one row per position.
    void append(int layer, const ad::Tensor& k_new, const ad::Tensor& v_new) {
        LayerKV& l = layers[static_cast<std::size_t>(layer)];
        if (k_new.rows() != v_new.rows() || k_new.cols() != heads * head_dim || v_new.cols() != heads * head_dim)
            throw std::invalid_argument("kv append: block shape mismatch");
        l.k.data.insert(l.k.data.end(), k_new.data.begin(), k_new.data.end());
        l.k.shape[0] += k_new.rows();
        l.v.data.insert(l.v.data.end(), v_new.data.begin(), v_new.data.end());
        l.v.shape[0] += v_new.rows();
    }

    void label(const std::vector<Segment>& labels) {
        segments.insert(segments.end(), labels.begin(), labels.end());
    }
};

// Replaces the keys/values at `placeholder` with external per-layer blocks.
// All other positions are untouched; the external block row count must
// equal the span length for every layer.
inline KVCache inject_kv(const KVCache& cache, Span placeholder,
                         const std::vector<KVCache::LayerKV>& external) {
    if (placeholder.begin < 0 || placeholder.end < placeholder.begin || placeholder.end > cache.positions())
        throw std::invalid_argument("inject_kv: placeholder span outside cache");
    if (external.size() != cache.layers.size())
        throw std::invalid_argument("inject_kv: external layer count " + std::to_string(external.size()) +
                                    " != cache layer count " + std::to_string(cache.layers.size()));
    KVCache out = cache;
    int span_len = placeholder.length();
    if (span_len == 0) return out;
    int width = cache.heads * cache.head_dim;
    for (std::size_t l = 0; l < external.size(); ++l) {
        const auto& ext = external[l];
        if (ext.k.rows() != span_len || ext.v.rows() != span_len || ext.k.cols() != width || ext.v.cols() != width)
            throw std::invalid_argument("inject_kv: external block shape mismatch at layer " + std::to_string(l));
        auto& dst = out.layers[l];
        std::size_t off = static_cast<std::size_t>(placeholder.begin) * width;
        std::copy(ext.k.data.begin(), ext.k.data.end(), dst.k.data.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(ext.v.data.begin(), ext.v.data.end(), dst.v.data.begin() + static_cast<std::ptrdiff_t>(off));
    }
    return out;
}

}  // namespace navmem::attn
