#pragma once

#include "navmem/dagger/schedule.hpp"
#include "navmem/dagger/trajectory.hpp"
#include "navmem/run/episode.hpp"

#include <atomic>
#include <future>
#include <string>
#include <vector>

namespace navmem::dagger {

// Mixed-policy trajectory collection. Per episode, each decision point
// first advances the oracle by the full plan horizon to label the visited
// state (on a scratch copy; the environment is untouched), then draws
// u ~ U(0,1) once per plan and executes the oracle's plan when u < beta_t,
// the learned policy's otherwise. T is the oracle plan count for the
// episode's world. Every visited state is stored with its oracle label.
inline Trajectory collect_episode(const env::GridWorld& world, const env::OracleTable& table,
                                  const env::Instruction& instruction, const run::Pipeline& pipeline,
                                  const policy::Policy* pol, const MixedPolicySchedule& schedule,
                                  std::uint64_t episode_seed, const std::string& provenance) {
    schedule.validate();
    const int horizon = pol ? pol->config().action_horizon : 4;
    run::EpisodeContext ctx(world, table, instruction.tokens, pipeline, episode_seed);
    Rng mix_rng(episode_seed ^ 0xD46A11E5ULL);

    int oracle_actions = table.distance(env::EnvState::initial(world));
    int total_plans = std::max(1, (oracle_actions + horizon - 1) / horizon);

    Trajectory traj;
    traj.world_id = world.id;
    traj.episode_seed = episode_seed;
    traj.template_id = instruction.template_id;
    traj.instruction = instruction.tokens;
    traj.provenance = provenance;

    int t_plan = 0;
    while (!ctx.done()) {
        PlanRecord rec;
        rec.state_hash = state_hash(ctx.state());
        rec.labels = env::oracle_plan(world, table, ctx.state(), horizon);

        double beta = beta_at(schedule, t_plan, total_plans);
        double u = mix_rng.uniform();
        std::vector<env::Action> plan;
        if (u < beta || pol == nullptr) {
            rec.from_oracle = true;
            plan = rec.labels;
        } else {
            rec.from_oracle = false;
            plan = ctx.plan_with(*pol).actions;
        }
        env::EnvState before = ctx.state();
        ctx.execute(plan);
        rec.executed.assign(plan.begin(), plan.begin() + (ctx.state().step_count - before.step_count));
        traj.records.push_back(std::move(rec));
        ++t_plan;
    }
    bool stopped = !traj.records.empty() && !traj.records.back().executed.empty() &&
                   traj.records.back().executed.back() == env::Action::stop;
    double ne = metrics::euclidean(ctx.state().cell, world.goal);
    traj.outcome = (stopped && ne <= 1.0) ? "success"
                   : ctx.state().step_count >= env::kMaxEpisodeSteps ? "truncated"
                                                                     : "fail";
    return traj;
}

// One collection round over a world set. Episodes run in parallel with
// per-episode RNG streams derived from the run seed; the store is merged
// in world order by a single writer, so the result is byte-identical for
// identical (policy, worlds, schedule, seed).
inline TrajectoryStore collect(const std::vector<env::GridWorld>& worlds,
                               const std::vector<env::Instruction>& instructions, const run::Pipeline& pipeline,
                               const policy::Policy* pol, const MixedPolicySchedule& schedule,
                               std::uint64_t run_seed, const std::string& provenance, int workers = 2) {
    if (worlds.size() != instructions.size())
        throw std::invalid_argument("collect: world/instruction count mismatch");
    std::vector<Trajectory> results(worlds.size());
    Rng seeder(run_seed ^ 0xC0115EC7ULL);
    std::vector<std::uint64_t> episode_seeds(worlds.size());
    for (auto& s : episode_seeds) s = seeder.next_u64();

    if (workers < 2 || worlds.size() < 2) {
        for (std::size_t i = 0; i < worlds.size(); ++i) {
            auto table = env::OracleTable::build(worlds[i]);
            results[i] = collect_episode(worlds[i], table, instructions[i], pipeline, pol, schedule,
                                         episode_seeds[i], provenance);
        }
    } else {
        std::vector<std::future<void>> futures;
        std::atomic<std::size_t> next{0};
        for (int wkr = 0; wkr < workers; ++wkr) {
            futures.push_back(std::async(std::launch::async, [&]() {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= worlds.size()) return;
                    auto table = env::OracleTable::build(worlds[i]);
                    results[i] = collect_episode(worlds[i], table, instructions[i], pipeline, pol, schedule,
                                                 episode_seeds[i], provenance);
                }
            }));
        }
        for (auto& f : futures) f.get();
    }
    TrajectoryStore store;
    for (auto& t : results) store.append(std::move(t));
    return store;
}

// Replays a stored trajectory and recomputes the oracle label of every
// visited state; used by the label-soundness checks.
inline bool verify_labels(const env::GridWorld& world, const Trajectory& traj, int horizon = 4) {
    auto table = env::OracleTable::build(world);
    env::EnvState state = env::EnvState::initial(world);
    for (const auto& rec : traj.records) {
        if (state_hash(state) != rec.state_hash) return false;
        auto labels = env::oracle_plan(world, table, state, horizon);
        if (labels != rec.labels) return false;
        for (env::Action a : rec.executed) state = env::step(world, state, a);
    }
    return state.done || traj.records.empty();
}

}  // namespace navmem::dagger
