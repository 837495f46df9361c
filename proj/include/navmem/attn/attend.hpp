#pragma once

#include "navmem/attn/kv.hpp"
#include "navmem/attn/mask.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace navmem::attn {

// Scaled dot-product attention of the trailing query positions over one
// layer of a cache, restricted to mask-allowed pairs. Queries are the last
// `queries.rows()` positions of the cache (they were just appended), so
// query row i is global position T - Tq + i. Disallowed pairs carry weight
// exactly zero: the softmax support is the allowed set itself.
inline ad::Tensor attend(const ad::Tensor& queries, const KVCache::LayerKV& kv,
                         const BlockSparseMask& mask, int heads) {
    if (queries.cols() != kv.k.cols() || kv.k.rows() != kv.v.rows())
        throw std::invalid_argument("attend: query/cache head-count mismatch");
    if (heads < 1 || queries.cols() % heads != 0)
        throw std::invalid_argument("attend: width not divisible by head count");
    int total = kv.k.rows();
    int tq = queries.rows();
    if (tq > total) throw std::invalid_argument("attend: more queries than cache positions");
    if (mask.total_tokens() != total) throw std::invalid_argument("attend: mask does not cover the cache");
    int dh = queries.cols() / heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    ad::Tensor out = ad::Tensor::zeros({tq, queries.cols()});
    std::vector<double> scores(static_cast<std::size_t>(total));
    for (int qi = 0; qi < tq; ++qi) {
        int gi = total - tq + qi;
        for (int h = 0; h < heads; ++h) {
            int col0 = h * dh;
            double mx = 0.0;
            bool any = false;
            for (int j = 0; j <= gi; ++j) {
                if (!mask.allowed(gi, j)) continue;
                double s = 0.0;
                for (int d = 0; d < dh; ++d) s += queries.at(qi, col0 + d) * kv.k.at(j, col0 + d);
                s *= inv_sqrt;
                scores[static_cast<std::size_t>(j)] = s;
                mx = any ? std::max(mx, s) : s;
                any = true;
            }
            if (!any) throw std::invalid_argument("attend: query position with empty allowed set");
            double denom = 0.0;
            for (int j = 0; j <= gi; ++j) {
                if (!mask.allowed(gi, j)) continue;
                denom += std::exp(scores[static_cast<std::size_t>(j)] - mx);
            }
            for (int j = 0; j <= gi; ++j) {
                if (!mask.allowed(gi, j)) continue;
                double w = std::exp(scores[static_cast<std::size_t>(j)] - mx) / denom;
                for (int d = 0; d < dh; ++d) out.at(qi, col0 + d) += w * kv.v.at(j, col0 + d);
            }
        }
    }
    return out;
}

// Attention weights of one head for one global query position; used by
// tests to audit that disallowed pairs carry zero mass.
inline std::vector<double> attend_weights(const ad::Tensor& queries, const KVCache::LayerKV& kv,
                                          const BlockSparseMask& mask, int heads, int query_row, int head) {
    int total = kv.k.rows();
    int tq = queries.rows();
    int dh = queries.cols() / heads;
    int gi = total - tq + query_row;
    int col0 = head * dh;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> w(static_cast<std::size_t>(total), 0.0);
    double mx = 0.0;
    bool any = false;
    for (int j = 0; j <= gi; ++j) {
        if (!mask.allowed(gi, j)) continue;
        double s = 0.0;
        for (int d = 0; d < dh; ++d) s += queries.at(query_row, col0 + d) * kv.k.at(j, col0 + d);
        s *= inv_sqrt;
        w[static_cast<std::size_t>(j)] = s;
        mx = any ? std::max(mx, s) : s;
        any = true;
    }
    double denom = 0.0;
    for (int j = 0; j <= gi; ++j)
        if (mask.allowed(gi, j)) denom += std::exp(w[static_cast<std::size_t>(j)] - mx);
    for (int j = 0; j < total; ++j)
        w[static_cast<std::size_t>(j)] = (j <= gi && mask.allowed(gi, j)) ? std::exp(w[static_cast<std::size_t>(j)] - mx) / denom : 0.0;
    return w;
}

}  // namespace navmem::attn
