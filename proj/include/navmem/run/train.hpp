#pragma once

#include "navmem/ad/optim.hpp"
#include "navmem/run/dataset.hpp"

#include <atomic>
#include <algorithm>
#include <future>
#include <numeric>
#include <vector>

namespace navmem::run {

struct TrainOptions {
    int batch = 8;
    int epochs = 20;
    double lr = 3e-3;
    double warmup_ratio = 0.03;
    int threads = 2;
    std::uint64_t shuffle_seed = 1;
};

struct TrainStats {
    std::vector<double> epoch_losses;
    int optimizer_steps = 0;
};

namespace detail {

// Shuffle, then group chunks of similar token count into consecutive
// batches and shuffle the batch order. Packing handles ragged lengths, so
// grouping only serves batch homogeneity.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<ChunkSample>& chunks, int batch,
                                                          Rng& rng) {
    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunks[a].token_count / 128 < chunks[b].token_count / 128;
    });
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch))
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + static_cast<std::size_t>(batch))));
    for (std::size_t i = batches.size(); i > 1; --i) std::swap(batches[i - 1], batches[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    return batches;
}

inline mem::RecursiveMemory replay_prefix_memory(const policy::Policy& pol,
                                                 const std::vector<policy::StepInput>& prefix) {
    mem::RecursiveMemory memory;
    for (std::size_t i = 0; i < prefix.size(); ++i) pol.predict(prefix[i], i == 0 ? nullptr : &memory, &memory);
    return memory;
}

}  // namespace detail

// Behavior-cloning loop: batches of packed chunks, one backward pass per
// chunk, gradients merged in fixed chunk order (bit-reproducible regardless
// of worker scheduling), Adam with warmup-then-linear-decay.
inline TrainStats train_policy(policy::Policy& pol, const std::vector<ChunkSample>& chunks,
                               const TrainOptions& opt) {
    TrainStats stats;
    if (chunks.empty() || opt.epochs <= 0) return stats;
    Rng shuffle_rng(opt.shuffle_seed ^ 0x7EA1A55EULL);
    const int batches_per_epoch = static_cast<int>((chunks.size() + opt.batch - 1) / static_cast<std::size_t>(opt.batch));
    const int total_steps = opt.epochs * batches_per_epoch;
    ad::AdamConfig adam;

    int step = 0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        auto batches = detail::make_batches(chunks, opt.batch, shuffle_rng);
        double epoch_loss = 0.0;
        long chunk_count = 0;
        for (const auto& batch_ids : batches) {
            std::vector<std::unique_ptr<ad::Tape>> tapes(batch_ids.size());
            std::vector<double> losses(batch_ids.size(), 0.0);
            auto run_chunk = [&](std::size_t slot) {
                const ChunkSample& chunk = chunks[batch_ids[slot]];
                policy::PackedBatch batch = chunk.batch;
                if (pol.config().memory_mode == policy::MemoryMode::recursive && !batch.start_of_episode)
                    batch.incoming_memory = detail::replay_prefix_memory(pol, chunk.prefix);
                auto tape = std::make_unique<ad::Tape>();
                ad::NodeId loss = pol.chunk_loss(*tape, batch);
                tape->backward(loss);
                losses[slot] = tape->val(loss).data[0];
                tapes[slot] = std::move(tape);
            };
            if (opt.threads > 1 && batch_ids.size() > 1) {
                std::atomic<std::size_t> next{0};
                std::vector<std::future<void>> fut;
                for (int w = 0; w < opt.threads; ++w)
                    fut.push_back(std::async(std::launch::async, [&]() {
                        while (true) {
                            std::size_t i = next.fetch_add(1);
                            if (i >= batch_ids.size()) return;
                            run_chunk(i);
                        }
                    }));
                for (auto& f : fut) f.get();
            } else {
                for (std::size_t i = 0; i < batch_ids.size(); ++i) run_chunk(i);
            }
            pol.params().zero_grads();
            for (auto& tape : tapes) tape->add_grads_to_params();  // fixed order
            double inv = 1.0 / static_cast<double>(batch_ids.size());
            for (auto& p : pol.params().all())
                for (double& g : p->grad) g *= inv;
            ++step;
            adam.lr = ad::lr_at(step, total_steps, opt.lr, opt.warmup_ratio);
            pol.params().adam_step_all(step, adam);
            for (double l : losses) epoch_loss += l;
            chunk_count += static_cast<long>(losses.size());
        }
        stats.epoch_losses.push_back(epoch_loss / static_cast<double>(chunk_count));
    }
    stats.optimizer_steps = step;
    return stats;
}

}  // namespace navmem::run
