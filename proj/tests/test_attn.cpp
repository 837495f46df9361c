#include "navmem/attn/attend.hpp"
#include "navmem/attn/kv.hpp"
#include "navmem/attn/mask.hpp"
#include "navmem/core/rng.hpp"
#include "testutil.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace navmem;
using testutil::random_tensor;

namespace {

// Independent evaluation of the spec predicate, built directly from step
// lengths rather than the mask structure.
bool predicate_oracle(const std::vector<int>& lengths, const std::vector<std::vector<attn::Span>>& spans,
                      int i, int j) {
    if (j > i) return false;
    int step_of_i = -1, start = 0, start_i = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        if (i >= start && i < start + lengths[s]) {
            step_of_i = static_cast<int>(s);
            start_i = start;
        }
        start += lengths[s];
    }
    if (j >= start_i) return true;
    if (spans.empty()) return false;
    for (const auto& sp : spans[static_cast<std::size_t>(step_of_i)])
        if (j >= sp.begin && j < sp.end) return true;
    return false;
}

attn::KVCache::LayerKV random_kv(int positions, int width, Rng& rng) {
    return {random_tensor({positions, width}, rng), random_tensor({positions, width}, rng)};
}

}  // namespace

TEST_CASE("single step mask is plain causal") {
    auto mask = attn::build_pack_mask({5});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) REQUIRE(mask.allowed(i, j) == (j <= i));
}

TEST_CASE("sixteen equal steps pack into disjoint causal blocks") {
    const int len = 3;
    auto mask = attn::build_pack_mask(std::vector<int>(16, len));
    REQUIRE(mask.total_tokens() == 48);
    for (int i = 0; i < 48; ++i)
        for (int j = 0; j < 48; ++j) {
            bool same_block = (i / len) == (j / len);
            REQUIRE(mask.allowed(i, j) == (j <= i && same_block));
        }
}

TEST_CASE("random packs match the brute-force predicate") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        int steps = 1 + rng.uniform_int(5);
        std::vector<int> lengths;
        for (int s = 0; s < steps; ++s) lengths.push_back(1 + rng.uniform_int(6));
        // random prefix spans into strictly earlier tokens
        std::vector<std::vector<attn::Span>> spans(static_cast<std::size_t>(steps));
        int offset = 0;
        for (int s = 0; s < steps; ++s) {
            if (offset > 0 && rng.uniform() < 0.5) {
                int b = rng.uniform_int(offset);
                int e = b + 1 + rng.uniform_int(offset - b);
                spans[static_cast<std::size_t>(s)].push_back({b, e});
            }
            offset += lengths[static_cast<std::size_t>(s)];
        }
        auto mask = attn::build_pack_mask(lengths, spans);
        int total = mask.total_tokens();
        for (int i = 0; i < total; ++i)
            for (int j = 0; j < total; ++j)
                REQUIRE(mask.allowed(i, j) == predicate_oracle(lengths, spans, i, j));
    }
}

TEST_CASE("pack mask argument validation") {
    REQUIRE_THROWS_AS(attn::build_pack_mask({}), std::invalid_argument);
    REQUIRE_THROWS_AS(attn::build_pack_mask({3, 0}), std::invalid_argument);
    REQUIRE_THROWS_AS(attn::build_pack_mask({3}, {{{0, 4}}}), std::invalid_argument);  // span reaches into block
}

TEST_CASE("attend respects causality on a two-token step") {
    Rng rng(7);
    auto kv = random_kv(2, 4, rng);
    ad::Tensor q = random_tensor({2, 4}, rng);
    auto mask = attn::build_pack_mask({2});
    auto w0 = attn::attend_weights(q, kv, mask, 1, 0, 0);
    REQUIRE(w0[0] == 1.0);
    REQUIRE(w0[1] == 0.0);
    auto w1 = attn::attend_weights(q, kv, mask, 1, 1, 0);
    REQUIRE(w1[0] > 0.0);
    REQUIRE(w1[1] > 0.0);
    REQUIRE(w1[0] + w1[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("packed attention equals the union of independent causal masks") {
    std::vector<int> lengths{3, 2};
    auto packed = attn::build_pack_mask(lengths);
    auto first = attn::build_pack_mask({3});
    auto second = attn::build_pack_mask({2});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            bool expect = false;
            if (i < 3 && j < 3) expect = first.allowed(i, j);
            if (i >= 3 && j >= 3) expect = second.allowed(i - 3, j - 3);
            REQUIRE(packed.allowed(i, j) == expect);
        }
}

TEST_CASE("packed forward equals per-step sequential forwards") {
    Rng rng(11);
    const int width = 8, heads = 2;
    auto kv_a = random_kv(3, width, rng);
    auto kv_b = random_kv(2, width, rng);
    ad::Tensor q_a = random_tensor({3, width}, rng);
    ad::Tensor q_b = random_tensor({2, width}, rng);

    auto out_a = attn::attend(q_a, kv_a, attn::build_pack_mask({3}), heads);
    auto out_b = attn::attend(q_b, kv_b, attn::build_pack_mask({2}), heads);

    attn::KVCache::LayerKV packed_kv;
    packed_kv.k = ad::Tensor::zeros({5, width});
    packed_kv.v = ad::Tensor::zeros({5, width});
    ad::Tensor packed_q = ad::Tensor::zeros({5, width});
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < 3; ++r) {
            packed_kv.k.at(r, c) = kv_a.k.at(r, c);
            packed_kv.v.at(r, c) = kv_a.v.at(r, c);
            packed_q.at(r, c) = q_a.at(r, c);
        }
        for (int r = 0; r < 2; ++r) {
            packed_kv.k.at(3 + r, c) = kv_b.k.at(r, c);
            packed_kv.v.at(3 + r, c) = kv_b.v.at(r, c);
            packed_q.at(3 + r, c) = q_b.at(r, c);
        }
    }
    auto packed_out = attn::attend(packed_q, packed_kv, attn::build_pack_mask({3, 2}), heads);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < width; ++c) REQUIRE(packed_out.at(r, c) == Catch::Approx(out_a.at(r, c)).margin(1e-5));
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < width; ++c) REQUIRE(packed_out.at(3 + r, c) == Catch::Approx(out_b.at(r, c)).margin(1e-5));
}

TEST_CASE("no attention mass on disallowed pairs") {
    Rng rng(23);
    std::vector<int> lengths{4, 3, 5};
    auto mask = attn::build_pack_mask(lengths, {{}, {{0, 2}}, {{4, 7}}});
    int total = mask.total_tokens();
    auto kv = random_kv(total, 6, rng);
    ad::Tensor q = random_tensor({total, 6}, rng);
    for (int i = 0; i < total; ++i) {
        auto w = attn::attend_weights(q, kv, mask, 2, i, 1);
        double sum = 0.0;
        for (int j = 0; j < total; ++j) {
            if (!mask.allowed(i, j)) REQUIRE(w[static_cast<std::size_t>(j)] == 0.0);
            sum += w[static_cast<std::size_t>(j)];
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("attend rejects width mismatches") {
    Rng rng(31);
    auto kv = random_kv(3, 8, rng);
    ad::Tensor q = random_tensor({3, 6}, rng);
    REQUIRE_THROWS_AS(attn::attend(q, kv, attn::build_pack_mask({3}), 2), std::invalid_argument);
    ad::Tensor q2 = random_tensor({3, 8}, rng);
    REQUIRE_THROWS_AS(attn::attend(q2, kv, attn::build_pack_mask({3}), 3), std::invalid_argument);
}

TEST_CASE("inject_kv with empty span is a no-op") {
    Rng rng(5);
    attn::KVCache cache(2, 2, 3);
    for (int l = 0; l < 2; ++l) cache.append(l, random_tensor({4, 6}, rng), random_tensor({4, 6}, rng));
    cache.label(std::vector<attn::Segment>(4, attn::Segment::current_obs));
    auto out = attn::inject_kv(cache, {2, 2}, {attn::KVCache::LayerKV{ad::Tensor::zeros({0, 6}), ad::Tensor::zeros({0, 6})},
                                               attn::KVCache::LayerKV{ad::Tensor::zeros({0, 6}), ad::Tensor::zeros({0, 6})}});
    for (int l = 0; l < 2; ++l) {
        REQUIRE(out.layers[l].k.data == cache.layers[l].k.data);
        REQUIRE(out.layers[l].v.data == cache.layers[l].v.data);
    }
}

TEST_CASE("inject_kv round trip is bit-identical") {
    Rng rng(6);
    attn::KVCache cache(1, 2, 3);
    cache.append(0, random_tensor({5, 6}, rng), random_tensor({5, 6}, rng));
    auto ext = random_kv(2, 6, rng);
    auto out = attn::inject_kv(cache, {1, 3}, {ext});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 6; ++c) {
            REQUIRE(out.layers[0].k.at(1 + r, c) == ext.k.at(r, c));
            REQUIRE(out.layers[0].v.at(1 + r, c) == ext.v.at(r, c));
        }
    // untouched rows
    for (int c = 0; c < 6; ++c) {
        REQUIRE(out.layers[0].k.at(0, c) == cache.layers[0].k.at(0, c));
        REQUIRE(out.layers[0].k.at(4, c) == cache.layers[0].k.at(4, c));
    }
}

TEST_CASE("inject_kv validates span length") {
    Rng rng(8);
    attn::KVCache cache(1, 1, 4);
    cache.append(0, random_tensor({4, 4}, rng), random_tensor({4, 4}, rng));
    auto ext = random_kv(3, 4, rng);  // span is length 2
    REQUIRE_THROWS_AS(attn::inject_kv(cache, {1, 3}, {ext}), std::invalid_argument);
}

TEST_CASE("downstream attention changes iff injected values differ") {
    Rng rng(9);
    attn::KVCache cache(1, 1, 4);
    cache.append(0, random_tensor({4, 4}, rng), random_tensor({4, 4}, rng));
    ad::Tensor q = random_tensor({1, 4}, rng);  // the last position queries
    auto mask = attn::build_pack_mask({4});

    // identical injection: output unchanged
    attn::KVCache::LayerKV same;
    same.k = ad::Tensor::zeros({2, 4});
    same.v = ad::Tensor::zeros({2, 4});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) {
            same.k.at(r, c) = cache.layers[0].k.at(1 + r, c);
            same.v.at(r, c) = cache.layers[0].v.at(1 + r, c);
        }
    auto base = attn::attend(q, cache.layers[0], mask, 1);
    auto inj_same = attn::inject_kv(cache, {1, 3}, {same});
    auto out_same = attn::attend(q, inj_same.layers[0], mask, 1);
    REQUIRE(out_same.data == base.data);

    // different injection: output moves
    auto diff = random_kv(2, 4, rng);
    auto inj_diff = attn::inject_kv(cache, {1, 3}, {diff});
    auto out_diff = attn::attend(q, inj_diff.layers[0], mask, 1);
    double delta = 0.0;
    for (std::size_t i = 0; i < base.data.size(); ++i) delta += std::fabs(out_diff.data[i] - base.data[i]);
    REQUIRE(delta > 1e-8);
}

TEST_CASE("per-head attention results are independent") {
    Rng rng(71);
    const int dh = 3, heads = 2;
    auto kv = random_kv(4, heads * dh, rng);
    ad::Tensor q = random_tensor({4, heads * dh}, rng);
    auto mask = attn::build_pack_mask({4});
    auto joint = attn::attend(q, kv, mask, heads);
    for (int h = 0; h < heads; ++h) {
        attn::KVCache::LayerKV part;
        part.k = ad::Tensor::zeros({4, dh});
        part.v = ad::Tensor::zeros({4, dh});
        ad::Tensor qp = ad::Tensor::zeros({4, dh});
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < dh; ++c) {
                part.k.at(r, c) = kv.k.at(r, h * dh + c);
                part.v.at(r, c) = kv.v.at(r, h * dh + c);
                qp.at(r, c) = q.at(r, h * dh + c);
            }
        auto solo = attn::attend(qp, part, mask, 1);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < dh; ++c) REQUIRE(solo.at(r, c) == joint.at(r, h * dh + c));
    }
}
