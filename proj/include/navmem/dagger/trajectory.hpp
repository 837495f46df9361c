#pragma once

#include "navmem/core/hash.hpp"
#include "navmem/env/sim.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::dagger {

inline std::uint64_t state_hash(const env::EnvState& s) {
    std::uint64_t h = fnv1a_u64(static_cast<std::uint64_t>(s.cell.x));
    h = fnv1a_u64(static_cast<std::uint64_t>(s.cell.y), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(s.heading), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(s.step_count), h);
    return h;
}

// One decision point: the visited state, the plan actually executed, and
// the oracle's A-step label for that state.
struct PlanRecord {
    std::uint64_t state_hash = 0;
    std::vector<env::Action> executed;  // truncated at stop / episode end
    std::vector<env::Action> labels;    // always the full horizon
    bool from_oracle = false;           // which policy produced `executed`
};

struct Trajectory {
    std::string world_id;
    std::uint64_t episode_seed = 0;
    int template_id = 0;
    std::vector<int> instruction;
    std::vector<PlanRecord> records;
    std::string outcome;      // success | fail | truncated
    std::string provenance;   // stage1 | dagger | eval

    int decision_count() const { return static_cast<int>(records.size()); }
    int executed_action_count() const {
        int n = 0;
        for (const auto& r : records) n += static_cast<int>(r.executed.size());
        return n;
    }
};

namespace detail {

inline std::string actions_str(const std::vector<env::Action>& actions) {
    std::string s;
    for (env::Action a : actions) s += env::action_char(a);
    return s;
}

inline std::vector<env::Action> actions_parse(const std::string& s) {
    std::vector<env::Action> out;
    for (char c : s) out.push_back(env::action_from_char(c));
    return out;
}

}  // namespace detail

// One episode per line; fields are space-separated key=value, steps are
// `;`-joined hash:executed:label:source tuples.
inline std::string trajectory_to_line(const Trajectory& t) {
    std::ostringstream os;
    os << "world=" << t.world_id << " seed=" << t.episode_seed << " tmpl=" << t.template_id << " instr=";
    for (std::size_t i = 0; i < t.instruction.size(); ++i) {
        if (i) os << ",";
        os << t.instruction[i];
    }
    os << " outcome=" << t.outcome << " prov=" << t.provenance << " steps=";
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        const auto& r = t.records[i];
        if (i) os << ";";
        os << hex64(r.state_hash) << ":" << detail::actions_str(r.executed) << ":" << detail::actions_str(r.labels)
           << ":" << (r.from_oracle ? "o" : "p");
    }
    return os.str();
}

inline Trajectory trajectory_from_line(const std::string& line) {
    Trajectory t;
    std::istringstream is(line);
    std::string field;
    while (is >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("trajectory line: bad field " + field);
        std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "world") t.world_id = val;
        else if (key == "seed") t.episode_seed = std::stoull(val);
        else if (key == "tmpl") t.template_id = std::stoi(val);
        else if (key == "instr") {
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ',')) t.instruction.push_back(std::stoi(tok));
        } else if (key == "outcome") t.outcome = val;
        else if (key == "prov") t.provenance = val;
        else if (key == "steps") {
            std::istringstream vs(val);
            std::string rec;
            while (std::getline(vs, rec, ';')) {
                std::istringstream rs(rec);
                std::string hash_s, exec_s, label_s, src_s;
                if (!std::getline(rs, hash_s, ':') || !std::getline(rs, exec_s, ':') ||
                    !std::getline(rs, label_s, ':') || !std::getline(rs, src_s))
                    throw std::invalid_argument("trajectory line: bad step record " + rec);
                PlanRecord r;
                r.state_hash = std::stoull(hash_s, nullptr, 16);
                r.executed = detail::actions_parse(exec_s);
                r.labels = detail::actions_parse(label_s);
                r.from_oracle = src_s == "o";
                t.records.push_back(std::move(r));
            }
        } else throw std::invalid_argument("trajectory line: unknown key " + key);
    }
    return t;
}

// Append-only collection of trajectories. Aggregation concatenates;
// existing entries are never rewritten.
struct TrajectoryStore {
    std::vector<Trajectory> items;

    void append(Trajectory t) { items.push_back(std::move(t)); }
    std::size_t size() const { return items.size(); }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::trunc | std::ios::binary);
        if (!os) throw std::runtime_error("cannot open trajectory store for write: " + path);
        std::ofstream idx(path + ".idx", std::ios::trunc);
        if (!idx) throw std::runtime_error("cannot open store index for write: " + path + ".idx");
        std::uint64_t offset = 0;
        for (const auto& t : items) {
            std::string line = trajectory_to_line(t) + "\n";
            idx << offset << "\n";
            os << line;
            offset += line.size();
        }
    }

    static TrajectoryStore load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot open trajectory store: " + path);
        TrajectoryStore store;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) store.append(trajectory_from_line(line));
        return store;
    }
};

// Union with provenance kept; the inputs are untouched.
inline TrajectoryStore aggregate(const TrajectoryStore& base, const TrajectoryStore& delta) {
    TrajectoryStore out = base;
    for (const auto& t : delta.items) out.append(t);
    return out;
}

}  // namespace navmem::dagger
