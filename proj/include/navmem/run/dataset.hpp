#pragma once

#include "navmem/dagger/trajectory.hpp"
#include "navmem/run/episode.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::run {

// One training sample: a packed chunk of consecutive decision steps plus,
// for recursive mid-episode chunks, the prefix inputs needed to recompute
// the incoming memory under the current weights.
struct ChunkSample {
    policy::PackedBatch batch;
    std::vector<policy::StepInput> prefix;  // steps before the chunk, episode order
    int token_count = 0;
    std::string world_id;
};

inline int step_tokens(const policy::StepInput& s, int horizon) { return s.layout.total + horizon; }

// Replays stored trajectories through the frozen encoder pipeline and
// splits them into chunks of at most `chunk_len` steps. State hashes are
// re-checked during replay; a mismatch means the store does not belong to
// these worlds.
inline std::vector<ChunkSample> build_chunks(const std::map<std::string, const env::GridWorld*>& worlds,
                                             const dagger::TrajectoryStore& store, const Pipeline& pipeline,
                                             int chunk_len, int horizon) {
    if (chunk_len < 1 || chunk_len > 16)
        throw std::invalid_argument("build_chunks: chunk length must lie in [1,16]");
    std::vector<ChunkSample> chunks;
    for (const auto& traj : store.items) {
        auto it = worlds.find(traj.world_id);
        if (it == worlds.end()) throw std::runtime_error("build_chunks: store references unknown world " + traj.world_id);
        const env::GridWorld& world = *it->second;
        auto table = env::OracleTable::build(world);
        EpisodeContext ctx(world, table, traj.instruction, pipeline, traj.episode_seed);

        std::vector<policy::StepInput> inputs;
        for (const auto& rec : traj.records) {
            if (dagger::state_hash(ctx.state()) != rec.state_hash)
                throw std::runtime_error("build_chunks: replay diverged from stored states in world " + traj.world_id);
            if (static_cast<int>(rec.labels.size()) != horizon)
                throw std::runtime_error("build_chunks: record without a full oracle label in world " + traj.world_id);
            policy::StepInput input = ctx.make_input();
            for (env::Action a : rec.labels) input.labels.push_back(static_cast<int>(a));
            inputs.push_back(std::move(input));
            ctx.replay(rec);
        }
        for (std::size_t begin = 0; begin < inputs.size(); begin += static_cast<std::size_t>(chunk_len)) {
            ChunkSample chunk;
            chunk.world_id = traj.world_id;
            chunk.batch.start_of_episode = begin == 0;
            std::size_t end = std::min(inputs.size(), begin + static_cast<std::size_t>(chunk_len));
            for (std::size_t i = begin; i < end; ++i) {
                chunk.batch.steps.push_back(inputs[i]);
                chunk.token_count += step_tokens(inputs[i], horizon);
            }
            for (std::size_t i = 0; i < begin; ++i) chunk.prefix.push_back(inputs[i]);
            chunks.push_back(std::move(chunk));
        }
    }
    return chunks;
}

// Teacher-forced per-plan action accuracy over a chunk set.
inline double plan_accuracy(const policy::Policy& pol, const std::vector<ChunkSample>& chunks) {
    long correct = 0, total = 0;
    for (const auto& chunk : chunks) {
        policy::PackedBatch batch = chunk.batch;
        if (pol.config().memory_mode == policy::MemoryMode::recursive && !batch.start_of_episode) {
            // rebuild the incoming memory by replaying the prefix
            mem::RecursiveMemory memory;
            for (std::size_t i = 0; i < chunk.prefix.size(); ++i)
                pol.predict(chunk.prefix[i], i == 0 ? nullptr : &memory, &memory);
            batch.incoming_memory = memory;
        }
        ad::Tape tape;
        policy::ForwardResult res = pol.forward(tape, batch);
        const ad::Tensor& logits = tape.val(res.logits);
        int row = 0;
        for (const auto& s : batch.steps)
            for (int i = 0; i < pol.config().action_horizon; ++i, ++row) {
                int best = 0;
                for (int j = 1; j < 4; ++j)
                    if (logits.at(row, j) > logits.at(row, best)) best = j;
                if (best == s.labels[static_cast<std::size_t>(i)]) ++correct;
                ++total;
            }
    }
    return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace navmem::run
