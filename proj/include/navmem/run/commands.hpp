#pragma once

#include "navmem/ad/checkpoint.hpp"
#include "navmem/dagger/collect.hpp"
#include "navmem/run/config.hpp"
#include "navmem/run/eval.hpp"
#include "navmem/run/manifest.hpp"
#include "navmem/run/plot.hpp"
#include "navmem/run/train.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>

namespace navmem::run {

// The frozen encoder stands in for a pretrained backbone: its weights
// depend only on the encoder configuration, never on the run seed, so any
// checkpoint works with any seed under the same architecture.
constexpr std::uint64_t kEncoderWeightSeed = 0xF0E1D2C3B4A59687ULL;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline std::shared_ptr<const enc::Encoder> make_encoder(const RunConfig& cfg) {
    return std::make_shared<enc::Encoder>(cfg.enc_cfg(), kEncoderWeightSeed);
}

inline std::vector<env::Instruction> instructions_for(const std::vector<env::GridWorld>& worlds,
                                                      const RunConfig& cfg, const env::Vocabulary& vocab) {
    std::vector<env::Instruction> out;
    out.reserve(worlds.size());
    for (std::size_t i = 0; i < worlds.size(); ++i) {
        auto table = env::OracleTable::build(worlds[i]);
        out.push_back(world_instruction(worlds[i], table, vocab, cfg.regime_for_world(static_cast<int>(i))));
    }
    return out;
}

inline std::map<std::string, const env::GridWorld*> world_index(const std::vector<env::GridWorld>& worlds) {
    std::map<std::string, const env::GridWorld*> idx;
    for (const auto& w : worlds) idx[w.id] = &w;
    return idx;
}

// ---- gen-worlds ----

// Train and eval pools come from disjoint seed streams and id prefixes;
// stage isolation asserts on the prefixes later.
struct GenWorldsResult {
    std::string train_path;
    std::string eval_path;
    std::string vocab_path;
};

inline GenWorldsResult cmd_gen_worlds(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    Rng train_seeds = Rng(cfg.seed).fork(1);
    Rng eval_seeds = Rng(cfg.seed).fork(2);
    std::vector<env::GridWorld> train, eval;
    for (int i = 0; i < cfg.world_count_train; ++i)
        train.push_back(env::generate_world(cfg.world_gen(), train_seeds.next_u64(), "t" + std::to_string(i)));
    for (int i = 0; i < cfg.world_count_eval; ++i)
        eval.push_back(env::generate_world(cfg.world_gen(), eval_seeds.next_u64(), "e" + std::to_string(i)));
    GenWorldsResult res;
    res.train_path = (std::filesystem::path(cfg.out_dir) / "worlds_train.txt").string();
    res.eval_path = (std::filesystem::path(cfg.out_dir) / "worlds_eval.txt").string();
    res.vocab_path = (std::filesystem::path(cfg.out_dir) / "vocab.txt").string();
    env::save_worlds(train, res.train_path);
    env::save_worlds(eval, res.eval_path);
    env::Vocabulary().save(res.vocab_path);
    return res;
}

// ---- train (stage 1) ----

struct TrainResult {
    std::string checkpoint_path;
    std::string store_path;
    std::string manifest_path;
    double final_loss = 0.0;
    double accuracy = 0.0;
};

inline TrainResult cmd_train(const RunConfig& cfg, const std::string& worlds_path, const std::string& vocab_path) {
    if (!std::filesystem::exists(worlds_path)) throw MissingArtifact("worlds file not found: " + worlds_path);
    if (!std::filesystem::exists(vocab_path)) throw MissingArtifact("vocabulary file not found: " + vocab_path);
    std::filesystem::create_directories(cfg.out_dir);
    RunManifest manifest = RunManifest::for_config(cfg);
    Timer total;

    auto worlds = env::load_worlds(worlds_path);
    // stage isolation: the eval pool (ids e<i>) must never enter training
    for (const auto& w : worlds)
        if (!w.id.empty() && w.id[0] == 'e')
            throw ConfigError("train: worlds file contains eval-pool world id '" + w.id + "'");
    auto vocab = env::Vocabulary::load(vocab_path);
    auto instructions = instructions_for(worlds, cfg, vocab);
    auto encoder = make_encoder(cfg);
    Pipeline pipeline = cfg.pipeline(encoder);

    // oracle demonstrations: the mixed policy degenerates to the expert
    Timer collect_t;
    auto pure_oracle = dagger::MixedPolicySchedule::constant(1.0);
    dagger::TrajectoryStore store =
        dagger::collect(worlds, instructions, pipeline, nullptr, pure_oracle, cfg.seed, "stage1", cfg.train_threads);
    manifest.timings["collect_s"] = collect_t.seconds();

    TrainResult res;
    res.store_path = (std::filesystem::path(cfg.out_dir) / "store_stage1.txt").string();
    store.save(res.store_path);

    Timer build_t;
    auto chunks = build_chunks(world_index(worlds), store, pipeline, cfg.train_chunk_len, cfg.policy_horizon);
    manifest.timings["build_chunks_s"] = build_t.seconds();

    policy::Policy pol(cfg.policy_cfg(vocab.size()), cfg.seed);
    Timer train_t;
    TrainOptions opt;
    opt.batch = cfg.train_batch;
    opt.epochs = cfg.train_epochs;
    opt.lr = cfg.train_lr;
    opt.warmup_ratio = cfg.train_warmup_ratio;
    opt.threads = cfg.train_threads;
    opt.shuffle_seed = cfg.seed;
    TrainStats stats = train_policy(pol, chunks, opt);
    manifest.timings["train_s"] = train_t.seconds();

    res.checkpoint_path = (std::filesystem::path(cfg.out_dir) / "checkpoint.bin").string();
    ad::save_checkpoint(pol.params(), res.checkpoint_path);

    res.final_loss = stats.epoch_losses.empty() ? std::log(4.0) : stats.epoch_losses.back();
    res.accuracy = plan_accuracy(pol, chunks);
    manifest.metrics["final_loss"] = res.final_loss;
    manifest.metrics["plan_accuracy"] = res.accuracy;
    manifest.metrics["optimizer_steps"] = stats.optimizer_steps;
    manifest.metrics["chunks"] = static_cast<double>(chunks.size());
    manifest.metrics["trajectories"] = static_cast<double>(store.size());
    manifest.artifacts["checkpoint"] = res.checkpoint_path;
    manifest.artifacts["store"] = res.store_path;
    manifest.timings["total_s"] = total.seconds();
    res.manifest_path = (std::filesystem::path(cfg.out_dir) / "manifest.json").string();
    manifest.save_atomic(res.manifest_path);
    return res;
}

// ---- dagger (stage 2) ----

struct DaggerResult {
    std::string checkpoint_path;
    std::string store_path;
    std::string manifest_path;
    double mean_train_steps = 0.0;  // primitive actions per collected trajectory
};

inline double mean_trajectory_actions(const dagger::TrajectoryStore& store) {
    if (store.items.empty()) return 0.0;
    double total = 0.0;
    for (const auto& t : store.items) total += t.executed_action_count();
    return total / static_cast<double>(store.items.size());
}

inline DaggerResult cmd_dagger(const RunConfig& cfg, const std::string& worlds_path, const std::string& vocab_path,
                               const std::string& checkpoint_path, const std::string& stage1_store_path,
                               bool sweep = false) {
    if (!std::filesystem::exists(checkpoint_path)) throw MissingArtifact("checkpoint not found: " + checkpoint_path);
    if (!std::filesystem::exists(stage1_store_path))
        throw MissingArtifact("stage-1 store not found: " + stage1_store_path);
    if (!std::filesystem::exists(worlds_path)) throw MissingArtifact("worlds file not found: " + worlds_path);
    std::filesystem::create_directories(cfg.out_dir);
    RunManifest manifest = RunManifest::for_config(cfg);
    Timer total;

    auto worlds = env::load_worlds(worlds_path);
    auto vocab = env::Vocabulary::load(vocab_path);
    auto instructions = instructions_for(worlds, cfg, vocab);
    auto encoder = make_encoder(cfg);
    Pipeline pipeline = cfg.pipeline(encoder);

    policy::Policy pol(cfg.policy_cfg(vocab.size()), cfg.seed);
    ad::load_checkpoint(pol.params(), checkpoint_path);
    dagger::TrajectoryStore stage1 = dagger::TrajectoryStore::load(stage1_store_path);

    if (sweep) {
        nlohmann::json table = nlohmann::json::array();
        std::vector<dagger::MixedPolicySchedule> schedules = {
            dagger::MixedPolicySchedule::constant(0.75), dagger::MixedPolicySchedule::constant(0.5),
            dagger::MixedPolicySchedule::constant(0.25), dagger::MixedPolicySchedule::dynamic(0.5)};
        for (const auto& sched : schedules) {
            Timer t;
            auto delta = dagger::collect(worlds, instructions, pipeline, &pol, sched, cfg.seed, "dagger",
                                         cfg.train_threads);
            nlohmann::json row;
            row["schedule"] = sched.label();
            row["mean_train_steps"] = mean_trajectory_actions(delta);
            row["mean_decisions"] = [&] {
                double d = 0.0;
                for (const auto& tr : delta.items) d += tr.decision_count();
                return delta.items.empty() ? 0.0 : d / static_cast<double>(delta.items.size());
            }();
            row["episodes"] = delta.size();
            row["collect_s"] = t.seconds();
            table.push_back(row);
        }
        manifest.tables["dagger_sweep"] = table;
    }

    Timer collect_t;
    auto delta =
        dagger::collect(worlds, instructions, pipeline, &pol, cfg.schedule(), cfg.seed, "dagger", cfg.train_threads);
    manifest.timings["collect_s"] = collect_t.seconds();

    DaggerResult res;
    res.mean_train_steps = mean_trajectory_actions(delta);
    dagger::TrajectoryStore aggregated = dagger::aggregate(stage1, delta);
    res.store_path = (std::filesystem::path(cfg.out_dir) / "store_aggregated.txt").string();
    aggregated.save(res.store_path);

    Timer train_t;
    auto chunks = build_chunks(world_index(worlds), aggregated, pipeline, cfg.train_chunk_len, cfg.policy_horizon);
    TrainOptions opt;
    opt.batch = cfg.train_batch;
    opt.epochs = cfg.train_epochs;
    opt.lr = cfg.train_lr;
    opt.warmup_ratio = cfg.train_warmup_ratio;
    opt.threads = cfg.train_threads;
    opt.shuffle_seed = cfg.seed ^ 0xDA66E4ULL;
    TrainStats stats = train_policy(pol, chunks, opt);
    manifest.timings["train_s"] = train_t.seconds();

    res.checkpoint_path = (std::filesystem::path(cfg.out_dir) / "checkpoint_dagger.bin").string();
    ad::save_checkpoint(pol.params(), res.checkpoint_path);

    manifest.metrics["mean_train_steps"] = res.mean_train_steps;
    manifest.metrics["final_loss"] = stats.epoch_losses.empty() ? 0.0 : stats.epoch_losses.back();
    manifest.metrics["aggregated_trajectories"] = static_cast<double>(aggregated.size());
    manifest.metrics["new_trajectories"] = static_cast<double>(delta.size());
    manifest.artifacts["checkpoint"] = res.checkpoint_path;
    manifest.artifacts["store"] = res.store_path;
    manifest.timings["total_s"] = total.seconds();
    res.manifest_path = (std::filesystem::path(cfg.out_dir) / "manifest_dagger.json").string();
    manifest.save_atomic(res.manifest_path);
    return res;
}

// ---- eval ----

struct EvalResult {
    EvalReport report;
    std::string manifest_path;
    std::string table_path;
    std::string kv_path;
};

inline EvalResult cmd_eval(const RunConfig& cfg, const std::string& worlds_path, const std::string& vocab_path,
                           const std::string& checkpoint_path, bool oracle_policy = false) {
    if (!oracle_policy && !std::filesystem::exists(checkpoint_path))
        throw MissingArtifact("checkpoint not found: " + checkpoint_path);
    if (!std::filesystem::exists(worlds_path)) throw MissingArtifact("worlds file not found: " + worlds_path);
    std::filesystem::create_directories(cfg.out_dir);
    RunManifest manifest = RunManifest::for_config(cfg);
    Timer total;

    auto worlds = env::load_worlds(worlds_path);
    auto vocab = env::Vocabulary::load(vocab_path);
    auto instructions = instructions_for(worlds, cfg, vocab);
    auto encoder = make_encoder(cfg);
    Pipeline pipeline = cfg.pipeline(encoder);

    std::unique_ptr<policy::Policy> pol;
    if (!oracle_policy) {
        pol = std::make_unique<policy::Policy>(cfg.policy_cfg(vocab.size()), cfg.seed);
        ad::load_checkpoint(pol->params(), checkpoint_path);
    }

    EvalResult res;
    res.report = evaluate(worlds, instructions, pipeline, pol.get(), cfg.seed, cfg.eval_threshold,
                          cfg.train_threads);
    manifest.metrics["ne"] = res.report.summary.ne;
    manifest.metrics["sr"] = res.report.summary.sr;
    manifest.metrics["osr"] = res.report.summary.osr;
    manifest.metrics["spl"] = res.report.summary.spl;
    manifest.metrics["ndtw"] = res.report.summary.ndtw;
    manifest.metrics["infer_steps"] = res.report.mean_infer_steps;
    manifest.metrics["tokens_per_forward"] = res.report.mean_tokens_per_forward;
    manifest.metrics["episodes"] = res.report.episodes;

    res.table_path = (std::filesystem::path(cfg.out_dir) / "report.txt").string();
    {
        std::ofstream os(res.table_path, std::ios::trunc);
        os << report_table(res.report);
    }
    res.kv_path = (std::filesystem::path(cfg.out_dir) / "report.kv").string();
    write_report_kv(res.report, res.kv_path);
    manifest.artifacts["report"] = res.table_path;
    manifest.artifacts["report_kv"] = res.kv_path;
    manifest.timings["total_s"] = total.seconds();
    res.manifest_path = (std::filesystem::path(cfg.out_dir) / "manifest_eval.json").string();
    manifest.save_atomic(res.manifest_path);
    return res;
}

// ---- plot ----

// Emits the three comparison figures with TSV twins. Malformed manifests
// are skipped with a warning; all-skipped is an error.
inline int cmd_plot(const std::vector<std::string>& manifest_paths, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    struct Entry {
        std::string label;
        RunManifest manifest;
        std::string mode;
    };
    std::vector<Entry> entries;
    for (const auto& path : manifest_paths) {
        try {
            Entry e;
            e.manifest = RunManifest::load(path);
            e.label = std::filesystem::path(path).parent_path().filename().string();
            if (e.label.empty()) e.label = std::filesystem::path(path).filename().string();
            RunConfig cfg = RunConfig::parse_text(e.manifest.config_text);
            e.mode = cfg.mem_mode;
            entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            std::cerr << "plot: skipping " << path << ": " << ex.what() << "\n";
        }
    }
    if (entries.empty()) return 1;

    auto metric_or = [](const Entry& e, const std::string& key, double fallback) {
        auto it = e.manifest.metrics.find(key);
        return it == e.manifest.metrics.end() ? fallback : it->second;
    };

    {
        std::vector<PlotPoint> pts;
        std::vector<std::vector<std::string>> rows;
        for (const auto& e : entries) {
            double x = metric_or(e, "mean_train_steps", metric_or(e, "infer_steps", 0.0));
            double y = metric_or(e, "sr", 0.0);
            pts.push_back({x, y, e.label});
            rows.push_back({e.label, detail::fmt(x), detail::fmt(y)});
        }
        write_scatter_svg((std::filesystem::path(out_dir) / "sr_vs_trajectory_length.svg").string(),
                          "success rate vs trajectory length", "mean trajectory length (actions)", "SR", pts);
        write_tsv((std::filesystem::path(out_dir) / "sr_vs_trajectory_length.tsv").string(),
                  {"label", "trajectory_length", "sr"}, rows);
    }
    {
        std::vector<PlotPoint> bars;
        std::vector<std::vector<std::string>> rows;
        for (const auto& e : entries) {
            double tokens = metric_or(e, "tokens_per_forward", 0.0);
            bars.push_back({0.0, tokens, e.label + " (" + e.mode + ")"});
            rows.push_back({e.label, e.mode, detail::fmt(tokens)});
        }
        write_bars_svg((std::filesystem::path(out_dir) / "tokens_by_memory_mode.svg").string(),
                       "tokens per forward by memory mode", "tokens", bars);
        write_tsv((std::filesystem::path(out_dir) / "tokens_by_memory_mode.tsv").string(),
                  {"label", "memory_mode", "tokens_per_forward"}, rows);
    }
    {
        std::vector<PlotPoint> bars;
        std::vector<std::vector<std::string>> rows;
        for (const auto& e : entries) {
            double sr = metric_or(e, "sr", 0.0);
            double spl = metric_or(e, "spl", 0.0);
            bars.push_back({0.0, sr, e.label});
            rows.push_back({e.label, detail::fmt(sr), detail::fmt(spl)});
        }
        write_bars_svg((std::filesystem::path(out_dir) / "data_composition.svg").string(),
                       "success rate by training data composition", "SR", bars);
        write_tsv((std::filesystem::path(out_dir) / "data_composition.tsv").string(), {"label", "sr", "spl"}, rows);
    }
    return 0;
}

}  // namespace navmem::run
