#pragma once

#include "navmem/dagger/trajectory.hpp"
#include "navmem/enc/encoder.hpp"
#include "navmem/env/instruction.hpp"
#include "navmem/env/oracle.hpp"
#include "navmem/env/sim.hpp"
#include "navmem/mem/progressive.hpp"
#include "navmem/mem/prompt.hpp"
#include "navmem/metrics/metrics.hpp"
#include "navmem/policy/policy.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace navmem::run {

// Everything an episode needs besides the world: observation rendering,
// the frozen encoder, and the memory configuration.
struct Pipeline {
    env::ObsConfig obs;
    std::shared_ptr<const enc::Encoder> encoder;
    policy::MemoryMode mode = policy::MemoryMode::progressive;
    int group_size = 3;      // K, progressive mode
    int sentinel_count = 64; // M, recursive mode

    const enc::EncoderConfig& enc_cfg() const { return encoder->config(); }
};

// Per-episode pipeline state: the environment, the geometry frame cache,
// the fused frames observed at decision points, and the policy-side
// recursive memory. Replaying the same executed actions with the same
// episode seed reproduces every feature bit-exactly.
class EpisodeContext {
public:
    EpisodeContext(const env::GridWorld& world, const env::OracleTable& table, std::vector<int> instruction,
                   const Pipeline& pipeline, std::uint64_t episode_seed)
        : world_(world),
          table_(table),
          instruction_(std::move(instruction)),
          pipeline_(pipeline),
          geo_cache_(pipeline.enc_cfg().geo_cache_limit, Rng(episode_seed ^ 0x5AFE5EEDULL)),
          state_(env::EnvState::initial(world)) {}

    const env::EnvState& state() const { return state_; }
    const env::GridWorld& world() const { return world_; }
    const env::OracleTable& oracle_table() const { return table_; }
    bool done() const { return state_.done; }

    // Observes the current state, fuses appearance and geometry, stores the
    // frame for future memory, and assembles the step input for the policy.
    policy::StepInput make_input() {
        int t = state_.step_count;
        if (!frames_.count(t)) {
            enc::ObservationFrame frame = env::observe(world_, state_, pipeline_.obs);
            enc::TokenGrid v = pipeline_.encoder->encode_2d(frame);
            enc::TokenGrid g = pipeline_.encoder->encode_geometry(frame, geo_cache_);
            frames_.emplace(t, enc::fuse(v, g));
        }
        const enc::TokenGrid& f = frames_.at(t);

        policy::StepInput input;
        input.step_index = t;
        input.obs_tokens = f.tokens;
        input.instruction = instruction_;
        if (pipeline_.mode == policy::MemoryMode::recursive) {
            input.layout = mem::assemble_recursive_prompt(f.count(), pipeline_.sentinel_count,
                                                          static_cast<int>(instruction_.size()));
        } else {
            mem::ProgressiveMemory memory = progressive_memory_at(t);
            input.layout = mem::assemble_progressive_prompt(f.count(), memory, static_cast<int>(instruction_.size()));
            for (const enc::TokenGrid* grid : memory.flatten_oldest_first())
                input.memory_tokens.insert(input.memory_tokens.end(), grid->tokens.begin(), grid->tokens.end());
        }
        return input;
    }

    // Progressive memory at decision step t: sampled history frames
    // {t-stride, t-2*stride, ...} (window-capped), folded oldest to newest.
    mem::ProgressiveMemory progressive_memory_at(int t) const {
        const auto& ec = pipeline_.enc_cfg();
        std::vector<int> available;
        for (const auto& [idx, grid] : frames_) available.push_back(idx);
        std::vector<int> sampled = enc::sample_history(available, ec.stride, t - ec.stride, ec.window);
        mem::ProgressiveMemory memory;
        memory.group_size = pipeline_.group_size;
        for (auto it = sampled.rbegin(); it != sampled.rend(); ++it)  // oldest first
            memory = mem::progressive_update(memory, frames_.at(*it));
        return memory;
    }

    // Greedy plan from the policy; maintains recursive memory across calls.
    policy::ActionPlan plan_with(const policy::Policy& pol) {
        policy::StepInput input = make_input();
        if (pipeline_.mode == policy::MemoryMode::recursive) {
            mem::RecursiveMemory next;
            auto plan = pol.predict(input, memory_.step_of_origin < 0 ? nullptr : &memory_, &next);
            memory_ = next;
            last_forward_tokens_ = input.layout.total + pol.config().action_horizon +
                                   (input.step_index == 0 ? pol.config().sentinel_count : 0);
            return plan;
        }
        auto plan = pol.predict(input);
        last_forward_tokens_ = input.layout.total + pol.config().action_horizon;
        return plan;
    }

    // Executes plan actions until the plan ends or the episode finishes.
    // Truncates at the first stop (the stop itself executes).
    void execute(const std::vector<env::Action>& plan) {
        for (env::Action a : plan) {
            if (state_.done) break;
            state_ = env::step(world_, state_, a);
            if (a == env::Action::stop) break;
        }
    }

    // Executes one recorded plan during replay (identical semantics).
    void replay(const dagger::PlanRecord& rec) { execute(rec.executed); }

    int last_forward_tokens() const { return last_forward_tokens_; }

    // for tests: expose the frame store size
    std::size_t frames_seen() const { return frames_.size(); }

private:
    const env::GridWorld& world_;
    const env::OracleTable& table_;
    std::vector<int> instruction_;
    Pipeline pipeline_;
    enc::GeometryFrameCache geo_cache_;
    env::EnvState state_;
    std::map<int, enc::TokenGrid> frames_;
    mem::RecursiveMemory memory_;
    int last_forward_tokens_ = 0;
};

// Deterministic per-world instruction: brief or verbose template over the
// oracle route, seeded by the world seed.
inline env::Instruction world_instruction(const env::GridWorld& world, const env::OracleTable& table,
                                          const env::Vocabulary& vocab, env::InstructionRegime regime) {
    auto actions = env::oracle_rollout(world, table, env::EnvState::initial(world));
    Rng rng(world.seed ^ (regime == env::InstructionRegime::verbose ? 0xBEEFULL : 0x5EEDULL));
    return env::generate_instruction(world, actions, vocab, regime, rng);
}

struct RolloutResult {
    dagger::Trajectory trajectory;
    metrics::EvalRecord record;
    double shortest_length = 0.0;
    int primitive_steps = 0;
    int forwards = 0;
    double mean_tokens_per_forward = 0.0;
    int max_forward_tokens = 0;
    bool stopped = false;
};

// Greedy policy rollout (or the oracle upper bound when `pol` is null).
inline RolloutResult run_episode(const env::GridWorld& world, const env::OracleTable& table,
                                 const env::Instruction& instruction, const Pipeline& pipeline,
                                 const policy::Policy* pol, std::uint64_t episode_seed, double success_threshold) {
    EpisodeContext ctx(world, table, instruction.tokens, pipeline, episode_seed);
    RolloutResult out;
    out.trajectory.world_id = world.id;
    out.trajectory.episode_seed = episode_seed;
    out.trajectory.template_id = instruction.template_id;
    out.trajectory.instruction = instruction.tokens;
    out.trajectory.provenance = "eval";

    double token_total = 0.0;
    while (!ctx.done()) {
        dagger::PlanRecord rec;
        rec.state_hash = dagger::state_hash(ctx.state());
        rec.labels = env::oracle_plan(world, table, ctx.state(), pol ? pol->config().action_horizon : 4);
        std::vector<env::Action> plan;
        if (pol) {
            plan = ctx.plan_with(*pol).actions;
            token_total += ctx.last_forward_tokens();
            out.max_forward_tokens = std::max(out.max_forward_tokens, ctx.last_forward_tokens());
            ++out.forwards;
            rec.from_oracle = false;
        } else {
            plan = rec.labels;
            rec.from_oracle = true;
        }
        env::EnvState before = ctx.state();
        ctx.execute(plan);
        rec.executed.assign(plan.begin(), plan.begin() + (ctx.state().step_count - before.step_count));
        out.trajectory.records.push_back(std::move(rec));
    }
    out.primitive_steps = ctx.state().step_count;
    if (!out.trajectory.records.empty()) {
        const auto& last = out.trajectory.records.back().executed;
        out.stopped = !last.empty() && last.back() == env::Action::stop;
    }
    out.mean_tokens_per_forward = out.forwards > 0 ? token_total / out.forwards : 0.0;

    out.record.agent_path = ctx.state().path_so_far;
    env::EnvState ref_state = env::EnvState::initial(world);
    while (!(ref_state.cell == world.goal)) ref_state = env::step(world, ref_state, env::oracle_action(world, table, ref_state));
    out.record.reference_path = ref_state.path_so_far;
    out.record.goal = world.goal;
    out.record.success_threshold = success_threshold;
    out.record.stopped = out.stopped;
    out.shortest_length = metrics::path_length(out.record.reference_path);
    out.trajectory.outcome = metrics::success(out.record) ? "success"
                             : ctx.state().step_count >= env::kMaxEpisodeSteps ? "truncated"
                                                                               : "fail";
    return out;
}

}  // namespace navmem::run
