#pragma once

#include "navmem/run/episode.hpp"

#include <atomic>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <vector>

namespace navmem::run {

struct EvalReport {
    metrics::MetricSummary summary;
    double mean_infer_steps = 0.0;     // primitive steps per episode
    double mean_tokens_per_forward = 0.0;
    double mean_forwards = 0.0;
    int episodes = 0;
    int max_tokens_per_forward = 0;
};

// Greedy rollouts over a world set; pass a null policy for the oracle
// upper bound. Episodes fan out across workers with per-episode seeds
// derived from `run_seed`; results are reduced in world order.
inline EvalReport evaluate(const std::vector<env::GridWorld>& worlds,
                           const std::vector<env::Instruction>& instructions, const Pipeline& pipeline,
                           const policy::Policy* pol, std::uint64_t run_seed, double threshold,
                           int workers = 2) {
    if (worlds.size() != instructions.size())
        throw std::invalid_argument("evaluate: world/instruction count mismatch");
    std::vector<RolloutResult> results(worlds.size());
    Rng seeder(run_seed ^ 0xE7A1ULL);
    std::vector<std::uint64_t> seeds(worlds.size());
    for (auto& s : seeds) s = seeder.next_u64();

    auto run_one = [&](std::size_t i) {
        auto table = env::OracleTable::build(worlds[i]);
        results[i] = run_episode(worlds[i], table, instructions[i], pipeline, pol, seeds[i], threshold);
    };
    if (workers > 1 && worlds.size() > 1) {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> fut;
        for (int w = 0; w < workers; ++w)
            fut.push_back(std::async(std::launch::async, [&]() {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= worlds.size()) return;
                    run_one(i);
                }
            }));
        for (auto& f : fut) f.get();
    } else {
        for (std::size_t i = 0; i < worlds.size(); ++i) run_one(i);
    }

    EvalReport report;
    std::vector<metrics::EvalRecord> records;
    std::vector<double> shortest;
    for (const auto& r : results) {
        records.push_back(r.record);
        shortest.push_back(r.shortest_length);
        report.mean_infer_steps += r.primitive_steps;
        report.mean_tokens_per_forward += r.mean_tokens_per_forward * r.forwards;
        report.mean_forwards += r.forwards;
        report.max_tokens_per_forward = std::max(report.max_tokens_per_forward, r.max_forward_tokens);
    }
    report.episodes = static_cast<int>(results.size());
    report.summary = metrics::summarize(records, shortest);
    if (report.episodes > 0) report.mean_infer_steps /= report.episodes;
    if (report.mean_forwards > 0) report.mean_tokens_per_forward /= report.mean_forwards;
    if (report.episodes > 0) report.mean_forwards /= report.episodes;
    return report;
}

// Structured text table, one metric per row.
inline std::string report_table(const EvalReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "metric" << std::setw(14) << "mean" << "count\n";
    auto row = [&](const char* name, double value) {
        os << std::left << std::setw(22) << name << std::setw(14) << std::setprecision(6) << value << r.episodes
           << "\n";
    };
    row("NE", r.summary.ne);
    row("SR", r.summary.sr);
    row("OSR", r.summary.osr);
    row("SPL", r.summary.spl);
    row("nDTW", r.summary.ndtw);
    row("infer_steps", r.mean_infer_steps);
    row("tokens_per_forward", r.mean_tokens_per_forward);
    return os.str();
}

// Machine-readable key=value file.
inline void write_report_kv(const EvalReport& r, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write eval report: " + path);
    os.precision(17);
    os << "ne = " << r.summary.ne << "\n";
    os << "sr = " << r.summary.sr << "\n";
    os << "osr = " << r.summary.osr << "\n";
    os << "spl = " << r.summary.spl << "\n";
    os << "ndtw = " << r.summary.ndtw << "\n";
    os << "infer_steps = " << r.mean_infer_steps << "\n";
    os << "tokens_per_forward = " << r.mean_tokens_per_forward << "\n";
    os << "episodes = " << r.episodes << "\n";
}

}  // namespace navmem::run
