#pragma once

#include "navmem/core/rng.hpp"
#include "navmem/enc/frame.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::enc {

struct EncoderConfig {
    int patch = 4;            // p: pixels per patch edge
    int dim = 64;             // c: token channel width
    int stride = 4;           // temporal sampling stride
    int window = 12;          // sliding window over sampled frames
    int geo_cache_limit = 16; // geometry frame cache capacity

    void validate() const {
        if (patch < 1) throw std::invalid_argument("encoder config: patch must be >= 1");
        if (dim < 1) throw std::invalid_argument("encoder config: dim must be >= 1");
        if (stride < 1) throw std::invalid_argument("encoder config: stride must be >= 1");
        if (window < 1) throw std::invalid_argument("encoder config: window must be >= 1");
        if (geo_cache_limit < 1) throw std::invalid_argument("encoder config: geometry cache limit must be >= 1");
    }
};

// H_tok x W_tok grid of C-dim feature vectors for one observation.
// downsample_factor is the linear factor relative to the full-resolution
// grid (1 for encoder output; powers of two under memory compression).
struct TokenGrid {
    int h_tok = 0;
    int w_tok = 0;
    int dim = 0;
    std::vector<double> tokens;  // h_tok * w_tok * dim, row-major
    int source_step = 0;
    int downsample_factor = 1;

    int count() const { return h_tok * w_tok; }
    double* token(int r, int c) { return &tokens[(static_cast<std::size_t>(r) * w_tok + c) * dim]; }
    const double* token(int r, int c) const { return &tokens[(static_cast<std::size_t>(r) * w_tok + c) * dim]; }
};

// Summaries of previously encoded frames for cross-frame geometry mixing.
// Index 0 is the reference frame and is never evicted; eviction among the
// rest is uniform from the episode's seeded RNG.
struct GeometryFrameCache {
    int limit = 16;
    std::vector<std::vector<double>> summaries;
    std::vector<int> steps;
    Rng rng;

    GeometryFrameCache() = default;
    GeometryFrameCache(int cache_limit, Rng r) : limit(cache_limit), rng(r) {}

    int size() const { return static_cast<int>(summaries.size()); }

    void insert(int step, std::vector<double> summary) {
        summaries.push_back(std::move(summary));
        steps.push_back(step);
        if (size() > limit) {
            int victim = 1 + rng.uniform_int(size() - 1);  // never index 0
            summaries.erase(summaries.begin() + victim);
            steps.erase(steps.begin() + victim);
        }
    }
};

// Frozen observation encoder. Weights are seeded-random projections fixed
// at construction; only the policy transformer trains. This keeps encoded
// features replayable bit-exactly from stored trajectories.
class Encoder {
public:
    Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed ^ 0xE5CDA7A3F0B1D2C4ULL);
        int c = cfg_.dim;
        int rgb_in = cfg_.patch * cfg_.patch * 3;
        int depth_in = cfg_.patch * cfg_.patch;
        rgb_embed_ = random_matrix(rng, rgb_in, c);
        group_proj_ = random_matrix(rng, c, c);
        depth_embed_ = random_matrix(rng, depth_in, c);
        geo_q_ = random_matrix(rng, c, c);
        geo_k_ = random_matrix(rng, c, c);
        geo_v_ = random_matrix(rng, c, c);
        geo_o_ = random_matrix(rng, c, c);
        align1_ = random_matrix(rng, c, c);
        align2_ = random_matrix(rng, c, c);
    }

    const EncoderConfig& config() const { return cfg_; }

    // Tokens per full-resolution frame for h x w inputs.
    int tokens_per_frame(int h, int w) const { return (h / (2 * cfg_.patch)) * (w / (2 * cfg_.patch)); }

    // Linear patch embedding at patch size p, then 2x2 mean-grouping and a
    // projection: (h/2p) x (w/2p) x c at factor 1.
    TokenGrid encode_2d(const ObservationFrame& frame) const {
        check_divisible(frame);
        int p = cfg_.patch, c = cfg_.dim;
        int ph = frame.h / p, pw = frame.w / p;
        std::vector<double> patches(static_cast<std::size_t>(ph) * pw * c, 0.0);
        std::vector<double> patch_in(static_cast<std::size_t>(p) * p * 3);
        for (int pr = 0; pr < ph; ++pr)
            for (int pc = 0; pc < pw; ++pc) {
                for (int r = 0; r < p; ++r)
                    for (int cc = 0; cc < p; ++cc)
                        for (int ch = 0; ch < 3; ++ch)
                            patch_in[(static_cast<std::size_t>(r) * p + cc) * 3 + ch] =
                                frame.rgb_at(pr * p + r, pc * p + cc, ch);
                apply(rgb_embed_, patch_in, &patches[(static_cast<std::size_t>(pr) * pw + pc) * c]);
            }
        return group_and_project(patches, ph, pw, frame.step_index);
    }

    // Depth patch embedding to the encode_2d shape, one cross-frame mixing
    // layer over cached frame summaries, cache insertion, then the 2-layer
    // alignment perceptron.
    TokenGrid encode_geometry(const ObservationFrame& frame, GeometryFrameCache& cache) const {
        check_divisible(frame);
        int p = cfg_.patch, c = cfg_.dim;
        int ph = frame.h / p, pw = frame.w / p;
        std::vector<double> patches(static_cast<std::size_t>(ph) * pw * c, 0.0);
        std::vector<double> patch_in(static_cast<std::size_t>(p) * p);
        for (int pr = 0; pr < ph; ++pr)
            for (int pc = 0; pc < pw; ++pc) {
                for (int r = 0; r < p; ++r)
                    for (int cc = 0; cc < p; ++cc)
                        patch_in[static_cast<std::size_t>(r) * p + cc] = frame.depth_at(pr * p + r, pc * p + cc);
                apply(depth_embed_, patch_in, &patches[(static_cast<std::size_t>(pr) * pw + pc) * c]);
            }
        TokenGrid grid = group_and_project(patches, ph, pw, frame.step_index);

        // frame summary: mean token before mixing
        std::vector<double> summary(static_cast<std::size_t>(c), 0.0);
        for (int i = 0; i < grid.count(); ++i)
            for (int j = 0; j < c; ++j) summary[static_cast<std::size_t>(j)] += grid.tokens[static_cast<std::size_t>(i) * c + j];
        for (double& s : summary) s /= grid.count();

        if (cache.size() > 0) mix_over_cache(grid, cache);
        cache.insert(frame.step_index, std::move(summary));

        // alignment head
        std::vector<double> tmp(static_cast<std::size_t>(c)), tmp2(static_cast<std::size_t>(c));
        for (int i = 0; i < grid.count(); ++i) {
            double* tok = &grid.tokens[static_cast<std::size_t>(i) * c];
            apply(align1_, std::vector<double>(tok, tok + c), tmp.data());
            for (double& tv : tmp) tv = gelu(tv);
            apply(align2_, tmp, tmp2.data());
            for (int j = 0; j < c; ++j) tok[j] = tmp2[static_cast<std::size_t>(j)];
        }
        return grid;
    }

private:
    static double gelu(double x) { return x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475244)); }

    void check_divisible(const ObservationFrame& frame) const {
        int q = 2 * cfg_.patch;
        if (frame.h % q != 0 || frame.w % q != 0)
            throw std::invalid_argument("encoder: frame " + std::to_string(frame.h) + "x" + std::to_string(frame.w) +
                                        " not divisible by 2*patch = " + std::to_string(q));
    }

    // [rows x cols], row-major, scaled so outputs stay O(1)
    static std::vector<double> random_matrix(Rng& rng, int rows, int cols) {
        std::vector<double> m(static_cast<std::size_t>(rows) * cols);
        double scale = 1.0 / std::sqrt(static_cast<double>(rows));
        for (double& v : m) v = rng.normal() * scale;
        return m;
    }

    // out[c] = sum_r in[r] * w[r*c..]; `w` is [in x out]
    static void apply(const std::vector<double>& w, const std::vector<double>& in, double* out) {
        std::size_t cols = w.size() / in.size();
        for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
        for (std::size_t r = 0; r < in.size(); ++r) {
            double v = in[r];
            if (v == 0.0) continue;
            const double* wr = &w[r * cols];
            for (std::size_t j = 0; j < cols; ++j) out[j] += v * wr[j];
        }
    }

    TokenGrid group_and_project(const std::vector<double>& patches, int ph, int pw, int step) const {
        int c = cfg_.dim;
        TokenGrid grid;
        grid.h_tok = ph / 2;
        grid.w_tok = pw / 2;
        grid.dim = c;
        grid.source_step = step;
        grid.downsample_factor = 1;
        grid.tokens.assign(static_cast<std::size_t>(grid.h_tok) * grid.w_tok * c, 0.0);
        std::vector<double> pooled(static_cast<std::size_t>(c));
        for (int r = 0; r < grid.h_tok; ++r)
            for (int cc = 0; cc < grid.w_tok; ++cc) {
                for (int j = 0; j < c; ++j)
                    pooled[static_cast<std::size_t>(j)] =
                        0.25 * (patches[(static_cast<std::size_t>(2 * r) * pw + 2 * cc) * c + j] +
                                patches[(static_cast<std::size_t>(2 * r) * pw + 2 * cc + 1) * c + j] +
                                patches[(static_cast<std::size_t>(2 * r + 1) * pw + 2 * cc) * c + j] +
                                patches[(static_cast<std::size_t>(2 * r + 1) * pw + 2 * cc + 1) * c + j]);
                apply(group_proj_, pooled, grid.token(r, cc));
            }
        return grid;
    }

    void mix_over_cache(TokenGrid& grid, const GeometryFrameCache& cache) const {
        int c = cfg_.dim;
        int n = cache.size();
        std::vector<double> keys(static_cast<std::size_t>(n) * c), vals(static_cast<std::size_t>(n) * c);
        for (int i = 0; i < n; ++i) {
            apply(geo_k_, cache.summaries[static_cast<std::size_t>(i)], &keys[static_cast<std::size_t>(i) * c]);
            apply(geo_v_, cache.summaries[static_cast<std::size_t>(i)], &vals[static_cast<std::size_t>(i) * c]);
        }
        double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c));
        std::vector<double> q(static_cast<std::size_t>(c)), mixed(static_cast<std::size_t>(c)), proj(static_cast<std::size_t>(c));
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int t = 0; t < grid.count(); ++t) {
            double* tok = &grid.tokens[static_cast<std::size_t>(t) * c];
            apply(geo_q_, std::vector<double>(tok, tok + c), q.data());
            double mx = -1e300;
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < c; ++j) s += q[static_cast<std::size_t>(j)] * keys[static_cast<std::size_t>(i) * c + j];
                scores[static_cast<std::size_t>(i)] = s * inv_sqrt;
                mx = std::max(mx, scores[static_cast<std::size_t>(i)]);
            }
            double denom = 0.0;
            for (int i = 0; i < n; ++i) {
                scores[static_cast<std::size_t>(i)] = std::exp(scores[static_cast<std::size_t>(i)] - mx);
                denom += scores[static_cast<std::size_t>(i)];
            }
            std::fill(mixed.begin(), mixed.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                double wv = scores[static_cast<std::size_t>(i)] / denom;
                for (int j = 0; j < c; ++j) mixed[static_cast<std::size_t>(j)] += wv * vals[static_cast<std::size_t>(i) * c + j];
            }
            apply(geo_o_, mixed, proj.data());
            for (int j = 0; j < c; ++j) tok[j] += proj[static_cast<std::size_t>(j)];
        }
    }

    EncoderConfig cfg_;
    std::vector<double> rgb_embed_, group_proj_, depth_embed_;
    std::vector<double> geo_q_, geo_k_, geo_v_, geo_o_;
    std::vector<double> align1_, align2_;
};

// Elementwise sum of appearance and geometry grids; shapes and source step
// must agree.
inline TokenGrid fuse(const TokenGrid& v, const TokenGrid& g) {
    if (v.h_tok != g.h_tok || v.w_tok != g.w_tok || v.dim != g.dim || v.source_step != g.source_step ||
        v.downsample_factor != g.downsample_factor)
        throw std::invalid_argument("fuse: grid shape or source step mismatch");
    TokenGrid f = v;
    for (std::size_t i = 0; i < f.tokens.size(); ++i) f.tokens[i] += g.tokens[i];
    return f;
}

// Temporal sampling: {t, t-stride, t-2*stride, ...} intersected with the
// available frame indices, newest first, at most `window` entries.
inline std::vector<int> sample_history(const std::vector<int>& available, int stride, int t, int window) {
    if (stride < 1) throw std::invalid_argument("sample_history: stride must be >= 1");
    std::vector<int> out;
    for (int idx = t; idx >= 0 && static_cast<int>(out.size()) < window; idx -= stride) {
        for (int a : available)
            if (a == idx) {
                out.push_back(idx);
                break;
            }
    }
    return out;
}

}  // namespace navmem::enc
