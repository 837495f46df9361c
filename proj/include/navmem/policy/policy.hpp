#pragma once

#include "navmem/ad/optim.hpp"
#include "navmem/ad/tape.hpp"
#include "navmem/attn/mask.hpp"
#include "navmem/core/rng.hpp"
#include "navmem/env/sim.hpp"
#include "navmem/mem/prompt.hpp"
#include "navmem/mem/recursive.hpp"

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::policy {

enum class MemoryMode { progressive, recursive };

inline const char* memory_mode_name(MemoryMode m) { return m == MemoryMode::progressive ? "progressive" : "recursive"; }
inline MemoryMode memory_mode_from(const std::string& s) {
    if (s == "progressive") return MemoryMode::progressive;
    if (s == "recursive") return MemoryMode::recursive;
    throw std::invalid_argument("unknown memory mode: " + s);
}

struct PolicyConfig {
    int layers = 2;
    int heads = 4;
    int dim = 64;
    int action_horizon = 4;  // A
    MemoryMode memory_mode = MemoryMode::progressive;
    int sentinel_count = 64;  // M, recursive mode
    int base_vocab = 0;       // instruction vocabulary size
    // positional capacity (maximum segment lengths)
    int max_obs_tokens = 16;
    int max_memory_tokens = 16;
    int max_instruction_tokens = 72;

    void validate() const {
        if (layers < 1 || heads < 1 || dim < 1) throw std::invalid_argument("policy config: layers/heads/dim must be >= 1");
        if (dim % heads != 0) throw std::invalid_argument("policy config: dim must be divisible by heads");
        if (action_horizon < 1) throw std::invalid_argument("policy config: action horizon must be >= 1");
        if (base_vocab < 1) throw std::invalid_argument("policy config: base vocabulary missing");
        if (sentinel_count < 1) throw std::invalid_argument("policy config: sentinel count must be >= 1");
        if (max_obs_tokens < 1 || max_memory_tokens < 1 || max_instruction_tokens < 1)
            throw std::invalid_argument("policy config: positional capacities must be >= 1");
    }

    int head_dim() const { return dim / heads; }

    // control symbols appended to the instruction vocabulary
    int memory_placeholder_id() const { return base_vocab; }
    int action_slot_id(int i) const { return base_vocab + 1 + i; }
    int vocab_rows() const { return base_vocab + 1 + action_horizon; }

    // reserved positional index ranges, one per segment kind
    int obs_pos_base() const { return 0; }
    int memory_pos_base() const { return max_obs_tokens; }
    int instr_pos_base() const { return max_obs_tokens + max_memory_tokens; }
    int sentinel_pos_base() const { return instr_pos_base() + max_instruction_tokens; }
    int action_pos_base() const { return sentinel_pos_base() + (memory_mode == MemoryMode::recursive ? sentinel_count : 0); }
    int pos_rows() const { return action_pos_base() + action_horizon; }
};

// One decision step in model-ready form: spec prompt segments plus the
// oracle labels when the step is a training sample.
struct StepInput {
    mem::PromptLayout layout;
    std::vector<double> obs_tokens;     // |f_t| x dim
    std::vector<double> memory_tokens;  // progressive: rows x dim, oldest first
    std::vector<int> instruction;       // base-vocabulary ids
    std::vector<int> labels;            // A oracle actions, empty if unlabeled
    int step_index = 0;                 // decision step this input observes
};

// Up to 16 consecutive steps flattened into one forward pass. In recursive
// mode a chunk either starts the episode (the initial memory is computed
// in-graph from the sentinel embeddings) or carries the memory state that
// entered its first step.
struct PackedBatch {
    std::vector<StepInput> steps;
    bool start_of_episode = true;
    mem::RecursiveMemory incoming_memory;
};

struct ActionPlan {
    std::vector<env::Action> actions;  // exactly A entries
    ad::Tensor logits;                 // A x 4
};

struct ForwardResult {
    ad::NodeId logits = 0;              // (A * steps) x 4
    int total_tokens = 0;               // tokens in the packed forward
    std::vector<int> block_lengths;     // per block (pseudo block included)
    attn::BlockSparseMask mask;
    mem::RecursiveMemory memory_out;    // recursive mode: state after the last step
};

// The navigation policy: a pre-LN causal transformer over the prompt
// protocol, reading A action logits from slot tokens appended after each
// step's prompt. All attention obeys a block-sparse pack mask; recursive
// memory substitutes m_pre key/value rows per layer.
class Policy {
public:
    Policy(const PolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed ^ 0xA30B75C4D16E9F82ULL);
        auto normal_init = [&](std::vector<int> shape, double scale) {
            ad::Tensor t = ad::Tensor::zeros(shape);
            for (double& v : t.data) v = rng.normal() * scale;
            return t;
        };
        int c = cfg_.dim, dh = cfg_.head_dim();
        params_.create("vocab", normal_init({cfg_.vocab_rows(), c}, 0.02));
        params_.create("pos", normal_init({cfg_.pos_rows(), c}, 0.02));
        if (cfg_.memory_mode == MemoryMode::recursive)
            params_.create("sentinel", normal_init({cfg_.sentinel_count, c}, 0.02));
        for (int l = 0; l < cfg_.layers; ++l) {
            std::string pre = "l" + std::to_string(l) + ".";
            params_.create(pre + "ln1.g", ones({c}));
            params_.create(pre + "ln1.b", ad::Tensor::zeros({c}));
            for (int h = 0; h < cfg_.heads; ++h) {
                std::string hp = pre + "h" + std::to_string(h) + ".";
                params_.create(hp + "wq", normal_init({c, dh}, 1.0 / std::sqrt(static_cast<double>(c))));
                params_.create(hp + "wk", normal_init({c, dh}, 1.0 / std::sqrt(static_cast<double>(c))));
                params_.create(hp + "wv", normal_init({c, dh}, 1.0 / std::sqrt(static_cast<double>(c))));
                params_.create(hp + "wo", normal_init({dh, c}, 1.0 / std::sqrt(static_cast<double>(dh * 2 * cfg_.layers))));
            }
            params_.create(pre + "ln2.g", ones({c}));
            params_.create(pre + "ln2.b", ad::Tensor::zeros({c}));
            params_.create(pre + "mlp.w1", normal_init({c, 4 * c}, 1.0 / std::sqrt(static_cast<double>(c))));
            params_.create(pre + "mlp.b1", ad::Tensor::zeros({4 * c}));
            params_.create(pre + "mlp.w2", normal_init({4 * c, c}, 1.0 / std::sqrt(static_cast<double>(4 * c * 2 * cfg_.layers))));
            params_.create(pre + "mlp.b2", ad::Tensor::zeros({c}));
        }
        params_.create("final_ln.g", ones({c}));
        params_.create("final_ln.b", ad::Tensor::zeros({c}));
        // zero head: an untrained policy emits uniform logits
        params_.create("head.w", ad::Tensor::zeros({c, 4}));
        params_.create("head.b", ad::Tensor::zeros({4}));
    }

    const PolicyConfig& config() const { return cfg_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

    // Packed forward over the tape. Validates every step's prompt against
    // the policy's memory mode.
    ForwardResult forward(ad::Tape& tape, const PackedBatch& batch) const {
        if (batch.steps.empty()) throw std::invalid_argument("forward: empty packed batch");
        if (batch.steps.size() > 16) throw std::invalid_argument("forward: packed batch exceeds 16 steps");
        const int c = cfg_.dim;
        const int a_len = cfg_.action_horizon;
        const bool recursive = cfg_.memory_mode == MemoryMode::recursive;
        const int m = cfg_.sentinel_count;

        for (const auto& s : batch.steps) check_step(s);

        ad::ParamStore& ps = const_cast<ad::ParamStore&>(params_);
        auto P = [&](const std::string& name) { return tape.param(ps.get(name)); };

        // shared embedding nodes
        ad::NodeId vocab_node = P("vocab");
        std::vector<int> slot_ids(static_cast<std::size_t>(a_len));
        for (int i = 0; i < a_len; ++i) slot_ids[static_cast<std::size_t>(i)] = cfg_.action_slot_id(i);
        ad::NodeId slot_embed = tape.embed(vocab_node, slot_ids);
        ad::NodeId mpre_embed = 0;
        ad::NodeId sentinel_node = 0;
        if (recursive) {
            mpre_embed = tape.embed(vocab_node, std::vector<int>(static_cast<std::size_t>(m), cfg_.memory_placeholder_id()));
            sentinel_node = P("sentinel");
        }

        // block layout: optional sentinel pseudo block, then one block per step
        ForwardResult res;
        const bool pseudo = recursive && batch.start_of_episode;
        std::vector<ad::NodeId> token_parts;
        std::vector<int> pos_indices;
        struct BlockInfo {
            int begin = 0, length = 0;
            int mpre_begin = -1;   // within pack
            int sent_begin = -1;   // within pack
            int act_begin = -1;    // within pack
        };
        std::vector<BlockInfo> blocks;
        int cursor = 0;

        if (pseudo) {
            BlockInfo b;
            b.begin = cursor;
            b.length = m;
            b.sent_begin = cursor;
            token_parts.push_back(sentinel_node);
            for (int i = 0; i < m; ++i) pos_indices.push_back(cfg_.sentinel_pos_base() + i);
            cursor += m;
            blocks.push_back(b);
        }
        for (const auto& s : batch.steps) {
            BlockInfo b;
            b.begin = cursor;
            int obs_n = s.layout.span_of(mem::SegmentKind::current_obs).length();
            int instr_n = s.layout.span_of(mem::SegmentKind::instruction).length();
            token_parts.push_back(tape.leaf(ad::Tensor({obs_n, c}, s.obs_tokens)));
            for (int i = 0; i < obs_n; ++i) pos_indices.push_back(cfg_.obs_pos_base() + i);
            cursor += obs_n;
            if (recursive) {
                b.mpre_begin = cursor;
                token_parts.push_back(mpre_embed);
                for (int i = 0; i < m; ++i) pos_indices.push_back(cfg_.memory_pos_base() + i);
                cursor += m;
            } else if (const mem::PromptSegment* seg = s.layout.find(mem::SegmentKind::memory)) {
                int mem_n = seg->span.length();
                if (mem_n > cfg_.max_memory_tokens)
                    throw std::invalid_argument("forward: memory segment exceeds positional capacity");
                token_parts.push_back(tape.leaf(ad::Tensor({mem_n, c}, s.memory_tokens)));
                for (int i = 0; i < mem_n; ++i) pos_indices.push_back(cfg_.memory_pos_base() + i);
                cursor += mem_n;
            }
            token_parts.push_back(tape.embed(vocab_node, s.instruction));
            for (int i = 0; i < instr_n; ++i) pos_indices.push_back(cfg_.instr_pos_base() + i);
            cursor += instr_n;
            if (recursive) {
                b.sent_begin = cursor;
                token_parts.push_back(sentinel_node);
                for (int i = 0; i < m; ++i) pos_indices.push_back(cfg_.sentinel_pos_base() + i);
                cursor += m;
            }
            b.act_begin = cursor;
            token_parts.push_back(slot_embed);
            for (int i = 0; i < a_len; ++i) pos_indices.push_back(cfg_.action_pos_base() + i);
            cursor += a_len;
            b.length = cursor - b.begin;
            blocks.push_back(b);
        }
        const int total = cursor;
        res.total_tokens = total;
        for (const auto& b : blocks) res.block_lengths.push_back(b.length);
        res.mask = attn::build_pack_mask(res.block_lengths);

        ad::NodeId x = tape.add(tape.concat_rows(token_parts), tape.embed(P("pos"), pos_indices));

        // incoming memory as constant leaves, split per head
        std::vector<std::vector<ad::NodeId>> in_k(static_cast<std::size_t>(cfg_.layers)),
            in_v(static_cast<std::size_t>(cfg_.layers));
        if (recursive && !pseudo) {
            if (batch.incoming_memory.sentinel_count != m ||
                static_cast<int>(batch.incoming_memory.layers.size()) != cfg_.layers)
                throw std::invalid_argument("forward: incoming memory does not match model (sentinel count or layers)");
            batch.incoming_memory.validate();
            for (int l = 0; l < cfg_.layers; ++l) {
                for (int h = 0; h < cfg_.heads; ++h) {
                    in_k[static_cast<std::size_t>(l)].push_back(
                        tape.leaf(head_cols(batch.incoming_memory.layers[static_cast<std::size_t>(l)].k, h)));
                    in_v[static_cast<std::size_t>(l)].push_back(
                        tape.leaf(head_cols(batch.incoming_memory.layers[static_cast<std::size_t>(l)].v, h)));
                }
            }
        }

        // sentinel-span K/V node ids of the last block, per layer/head, for memory capture
        std::vector<std::vector<ad::NodeId>> cap_k(static_cast<std::size_t>(cfg_.layers)),
            cap_v(static_cast<std::size_t>(cfg_.layers));

        const int dh = cfg_.head_dim();
        const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int l = 0; l < cfg_.layers; ++l) {
            std::string pre = "l" + std::to_string(l) + ".";
            ad::NodeId h_in = tape.layernorm(x, P(pre + "ln1.g"), P(pre + "ln1.b"));
            ad::NodeId attn_sum = 0;
            bool have_attn = false;
            for (int h = 0; h < cfg_.heads; ++h) {
                std::string hp = pre + "h" + std::to_string(h) + ".";
                ad::NodeId q = tape.matmul(h_in, P(hp + "wq"));
                ad::NodeId k = tape.matmul(h_in, P(hp + "wk"));
                ad::NodeId v = tape.matmul(h_in, P(hp + "wv"));
                cap_k[static_cast<std::size_t>(l)].push_back(k);
                cap_v[static_cast<std::size_t>(l)].push_back(v);

                std::vector<ad::NodeId> outs;
                for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
                    const BlockInfo& b = blocks[bi];
                    ad::NodeId qb = tape.slice_rows(q, b.begin, b.begin + b.length);
                    ad::NodeId kb, vb;
                    if (recursive && b.mpre_begin >= 0) {
                        // substitute m_pre keys/values with the previous
                        // step's m_cur rows (or the injected state)
                        ad::NodeId src_k, src_v;
                        if (!pseudo && bi == 0) {
                            src_k = in_k[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)];
                            src_v = in_v[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)];
                        } else {
                            const BlockInfo& p = blocks[bi - 1];
                            if (p.sent_begin < 0) throw std::logic_error("forward: predecessor block lacks sentinels");
                            src_k = tape.slice_rows(k, p.sent_begin, p.sent_begin + m);
                            src_v = tape.slice_rows(v, p.sent_begin, p.sent_begin + m);
                        }
                        kb = tape.concat_rows({tape.slice_rows(k, b.begin, b.mpre_begin), src_k,
                                               tape.slice_rows(k, b.mpre_begin + m, b.begin + b.length)});
                        vb = tape.concat_rows({tape.slice_rows(v, b.begin, b.mpre_begin), src_v,
                                               tape.slice_rows(v, b.mpre_begin + m, b.begin + b.length)});
                    } else {
                        kb = tape.slice_rows(k, b.begin, b.begin + b.length);
                        vb = tape.slice_rows(v, b.begin, b.begin + b.length);
                    }
                    std::vector<int> limits(static_cast<std::size_t>(b.length));
                    for (int i = 0; i < b.length; ++i) limits[static_cast<std::size_t>(i)] = i + 1;
                    ad::NodeId weights =
                        tape.softmax_rows_limited(tape.scale(tape.matmul_bt(qb, kb), inv_sqrt_dh), std::move(limits));
                    outs.push_back(tape.matmul(weights, vb));
                }
                ad::NodeId head_out = outs.size() == 1 ? outs[0] : tape.concat_rows(outs);
                ad::NodeId proj = tape.matmul(head_out, P(hp + "wo"));
                attn_sum = have_attn ? tape.add(attn_sum, proj) : proj;
                have_attn = true;
            }
            x = tape.add(x, attn_sum);
            ad::NodeId h2 = tape.layernorm(x, P(pre + "ln2.g"), P(pre + "ln2.b"));
            ad::NodeId mlp = tape.add_bias(
                tape.matmul(tape.gelu(tape.add_bias(tape.matmul(h2, P(pre + "mlp.w1")), P(pre + "mlp.b1"))),
                            P(pre + "mlp.w2")),
                P(pre + "mlp.b2"));
            x = tape.add(x, mlp);
        }
        ad::NodeId fin = tape.layernorm(x, P("final_ln.g"), P("final_ln.b"));
        std::vector<ad::NodeId> act_rows;
        for (const auto& b : blocks)
            if (b.act_begin >= 0) act_rows.push_back(tape.slice_rows(fin, b.act_begin, b.act_begin + a_len));
        ad::NodeId rows = act_rows.size() == 1 ? act_rows[0] : tape.concat_rows(act_rows);
        res.logits = tape.add_bias(tape.matmul(rows, P("head.w")), P("head.b"));

        if (recursive) {
            const BlockInfo& last = blocks.back();
            res.memory_out = capture_memory(tape, cap_k, cap_v, last.sent_begin);
            res.memory_out.step_of_origin = batch.steps.back().step_index;
        }
        return res;
    }

    // Greedy plan for one step. Recursive mode consumes `memory` (the
    // initial state when step_of_origin < 0) and returns the updated state.
    ActionPlan predict(const StepInput& input, const mem::RecursiveMemory* memory = nullptr,
                       mem::RecursiveMemory* memory_out = nullptr) const {
        PackedBatch batch;
        batch.steps.push_back(input);
        if (cfg_.memory_mode == MemoryMode::recursive) {
            if (memory == nullptr || memory->step_of_origin < 0) {
                batch.start_of_episode = true;  // initial memory computed in-graph
            } else {
                if (memory->step_of_origin >= input.step_index)
                    throw std::invalid_argument("predict: memory state is not older than the current step");
                batch.start_of_episode = false;
                batch.incoming_memory = *memory;
            }
        }
        ad::Tape tape;
        ForwardResult res = forward(tape, batch);
        ActionPlan plan;
        plan.logits = tape.val(res.logits);
        for (int i = 0; i < cfg_.action_horizon; ++i) {
            int best = 0;
            for (int j = 1; j < 4; ++j)
                if (plan.logits.at(i, j) > plan.logits.at(i, best)) best = j;
            plan.actions.push_back(static_cast<env::Action>(best));
        }
        if (memory_out != nullptr && cfg_.memory_mode == MemoryMode::recursive) *memory_out = res.memory_out;
        return plan;
    }

    // Cross-entropy over all A*steps action positions, mean-reduced.
    ad::NodeId chunk_loss(ad::Tape& tape, const PackedBatch& batch, ForwardResult* result_out = nullptr) const {
        ForwardResult res = forward(tape, batch);
        std::vector<int> targets;
        for (const auto& s : batch.steps) {
            if (static_cast<int>(s.labels.size()) != cfg_.action_horizon)
                throw std::invalid_argument("chunk_loss: step without oracle labels");
            for (int l : s.labels) targets.push_back(l);
        }
        ad::NodeId loss = tape.cross_entropy(res.logits, std::move(targets));
        if (result_out) *result_out = res;
        return loss;
    }

private:
    static ad::Tensor ones(std::vector<int> shape) {
        ad::Tensor t = ad::Tensor::zeros(std::move(shape));
        for (double& v : t.data) v = 1.0;
        return t;
    }

    // columns of one head from an [M x heads*dh] block
    ad::Tensor head_cols(const ad::Tensor& block, int head) const {
        int dh = cfg_.head_dim();
        ad::Tensor out = ad::Tensor::zeros({block.rows(), dh});
        for (int r = 0; r < block.rows(); ++r)
            for (int j = 0; j < dh; ++j) out.at(r, j) = block.at(r, head * dh + j);
        return out;
    }

    void check_step(const StepInput& s) const {
        s.layout.validate();
        const bool recursive = cfg_.memory_mode == MemoryMode::recursive;
        const mem::PromptSegment* sent = s.layout.find(mem::SegmentKind::sentinel);
        if (recursive && (sent == nullptr || sent->span.length() != cfg_.sentinel_count))
            throw std::invalid_argument("policy/prompt mismatch: recursive policy needs a sentinel segment of length M");
        if (!recursive && sent != nullptr)
            throw std::invalid_argument("policy/prompt mismatch: progressive policy got a sentinel segment");
        const mem::PromptSegment* memseg = s.layout.find(mem::SegmentKind::memory);
        if (recursive && (memseg == nullptr || memseg->span.length() != cfg_.sentinel_count))
            throw std::invalid_argument("policy/prompt mismatch: recursive prompt needs an m_pre span of length M");
        int obs_n = s.layout.span_of(mem::SegmentKind::current_obs).length();
        int instr_n = s.layout.span_of(mem::SegmentKind::instruction).length();
        if (obs_n > cfg_.max_obs_tokens || instr_n > cfg_.max_instruction_tokens)
            throw std::invalid_argument("policy/prompt mismatch: segment exceeds positional capacity");
        if (static_cast<int>(s.obs_tokens.size()) != obs_n * cfg_.dim)
            throw std::invalid_argument("policy/prompt mismatch: obs token payload size");
        if (static_cast<int>(s.instruction.size()) != instr_n)
            throw std::invalid_argument("policy/prompt mismatch: instruction payload size");
        if (!recursive) {
            int mem_n = memseg ? memseg->span.length() : 0;
            if (static_cast<int>(s.memory_tokens.size()) != mem_n * cfg_.dim)
                throw std::invalid_argument("policy/prompt mismatch: memory token payload size");
        }
    }

    mem::RecursiveMemory capture_memory(const ad::Tape& tape, const std::vector<std::vector<ad::NodeId>>& cap_k,
                                        const std::vector<std::vector<ad::NodeId>>& cap_v, int sent_begin) const {
        if (sent_begin < 0) throw std::logic_error("capture_memory: block lacks a sentinel span");
        const int m = cfg_.sentinel_count, dh = cfg_.head_dim();
        mem::RecursiveMemory out;
        out.sentinel_count = m;
        out.layers.resize(static_cast<std::size_t>(cfg_.layers));
        for (int l = 0; l < cfg_.layers; ++l) {
            ad::Tensor K = ad::Tensor::zeros({m, cfg_.heads * dh});
            ad::Tensor V = ad::Tensor::zeros({m, cfg_.heads * dh});
            for (int h = 0; h < cfg_.heads; ++h) {
                const ad::Tensor& kv = tape.val(cap_k[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)]);
                const ad::Tensor& vv = tape.val(cap_v[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)]);
                for (int r = 0; r < m; ++r)
                    for (int j = 0; j < dh; ++j) {
                        K.at(r, h * dh + j) = kv.at(sent_begin + r, j);
                        V.at(r, h * dh + j) = vv.at(sent_begin + r, j);
                    }
            }
            out.layers[static_cast<std::size_t>(l)] = {std::move(K), std::move(V)};
        }
        return out;
    }

    PolicyConfig cfg_;
    ad::ParamStore params_;
};

}  // namespace navmem::policy
