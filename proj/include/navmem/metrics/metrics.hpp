#pragma once

#include "navmem/env/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace navmem::metrics {

// Inputs for one episode's evaluation. Paths are cell sequences (rotations
// and blocked moves repeat a cell, contributing zero length).
struct EvalRecord {
    std::vector<env::Cell> agent_path;
    std::vector<env::Cell> reference_path;
    env::Cell goal;
    double success_threshold = 1.0;  // d_th, cell units
    bool stopped = false;

    void validate() const {
        if (agent_path.empty() || reference_path.empty())
            throw std::invalid_argument("eval record: paths must be non-empty");
        if (success_threshold <= 0.0) throw std::invalid_argument("eval record: threshold must be positive");
    }
};

inline double euclidean(env::Cell a, env::Cell b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline double path_length(const std::vector<env::Cell>& path) {
    double len = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) len += euclidean(path[i - 1], path[i]);
    return len;
}

// NE: distance from the final agent cell to the goal.
inline double navigation_error(const EvalRecord& rec) {
    rec.validate();
    return euclidean(rec.agent_path.back(), rec.goal);
}

// SR: stopped within d_th of the goal.
inline int success(const EvalRecord& rec) {
    rec.validate();
    return (rec.stopped && navigation_error(rec) <= rec.success_threshold) ? 1 : 0;
}

// OSR: some point of the path came within d_th of the goal.
inline int oracle_success(const EvalRecord& rec) {
    rec.validate();
    for (const auto& c : rec.agent_path)
        if (euclidean(c, rec.goal) <= rec.success_threshold) return 1;
    return 0;
}

// SPL: success weighted by shortest / max(shortest, traveled).
inline double spl(const EvalRecord& rec, double shortest_length) {
    rec.validate();
    if (shortest_length <= 0.0) throw std::invalid_argument("spl: shortest length must be positive");
    double traveled = path_length(rec.agent_path);
    return success(rec) * shortest_length / std::max(shortest_length, traveled);
}

// DTW under Euclidean point cost, full dynamic programming.
inline double dtw(const std::vector<env::Cell>& a, const std::vector<env::Cell>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw: empty path");
    const std::size_t n = a.size(), m = b.size();
    const double inf = 1e300;
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            double cost = euclidean(a[i - 1], b[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// nDTW: exp(-DTW(agent, reference) / (|reference| * d_th)).
inline double ndtw(const EvalRecord& rec) {
    rec.validate();
    double d = dtw(rec.agent_path, rec.reference_path);
    return std::exp(-d / (static_cast<double>(rec.reference_path.size()) * rec.success_threshold));
}

// Aggregates over an episode set. Invalid per-episode entries are zeroed
// before averaging.
struct MetricSummary {
    double ne = 0.0;
    double sr = 0.0;
    double osr = 0.0;
    double spl = 0.0;
    double ndtw = 0.0;
    int episodes = 0;
};

inline MetricSummary summarize(const std::vector<EvalRecord>& records,
                               const std::vector<double>& shortest_lengths) {
    if (records.size() != shortest_lengths.size())
        throw std::invalid_argument("summarize: record/shortest-length count mismatch");
    MetricSummary s;
    s.episodes = static_cast<int>(records.size());
    if (records.empty()) return s;
    for (std::size_t i = 0; i < records.size(); ++i) {
        double sp = 0.0;
        if (shortest_lengths[i] > 0.0) sp = spl(records[i], shortest_lengths[i]);
        s.ne += navigation_error(records[i]);
        s.sr += success(records[i]);
        s.osr += oracle_success(records[i]);
        s.spl += sp;
        double nd = ndtw(records[i]);
        s.ndtw += std::isfinite(nd) ? nd : 0.0;
    }
    double n = static_cast<double>(records.size());
    s.ne /= n;
    s.sr /= n;
    s.osr /= n;
    s.spl /= n;
    s.ndtw /= n;
    return s;
}

}  // namespace navmem::metrics
