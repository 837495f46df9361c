#pragma once

#include "navmem/core/hash.hpp"
#include "navmem/dagger/schedule.hpp"
#include "navmem/enc/encoder.hpp"
#include "navmem/env/instruction.hpp"
#include "navmem/env/world.hpp"
#include "navmem/mem/progressive.hpp"
#include "navmem/policy/policy.hpp"
#include "navmem/run/episode.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace navmem::run {

// exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exit code 3
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InstructionMix { brief, verbose, mixed };

// Flat key=value run configuration. Unknown keys are rejected; every value
// is parsed and range-checked with a field-level message.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/out";

    int world_width = 9;
    int world_height = 9;
    double world_wall_density = 0.18;
    int world_landmarks = 2;
    int world_min_goal_dist = 4;
    int world_max_goal_dist = 64;
    int world_count_train = 200;
    int world_count_eval = 60;

    InstructionMix instr_regime = InstructionMix::mixed;

    int obs_view_cells = 8;
    int obs_cell_px = 4;

    int enc_patch = 4;
    int enc_dim = 64;
    int enc_stride = 4;       // temporal sampling stride
    int enc_window = 12;      // sliding window
    int enc_geo_cache = 16;

    std::string mem_mode = "progressive";
    int mem_group_size = 3;   // K
    int mem_sentinels = 64;   // M

    int policy_layers = 2;
    int policy_heads = 4;
    int policy_horizon = 4;
    int policy_max_instr = 128;

    std::string sched_mode = "dynamic";
    double sched_beta = 0.25;
    double sched_alpha = 0.5;

    int train_chunk_len = 16;
    int train_batch = 8;
    int train_epochs = 20;
    double train_lr = 3e-3;
    double train_warmup_ratio = 0.03;
    int train_threads = 2;

    double eval_threshold = 1.0;

    void set(const std::string& key, const std::string& value) {
        auto to_int = [&](int lo, int hi) {
            int v;
            try {
                v = std::stoi(value);
            } catch (...) {
                throw ConfigError("config field '" + key + "': integer expected, got '" + value + "'");
            }
            if (v < lo || v > hi)
                throw ConfigError("config field '" + key + "': value " + value + " outside [" + std::to_string(lo) +
                                  "," + std::to_string(hi) + "]");
            return v;
        };
        auto to_double = [&](double lo, double hi) {
            double v;
            try {
                v = std::stod(value);
            } catch (...) {
                throw ConfigError("config field '" + key + "': number expected, got '" + value + "'");
            }
            if (v < lo || v > hi)
                throw ConfigError("config field '" + key + "': value " + value + " outside range");
            return v;
        };
        if (key == "seed") {
            try {
                seed = std::stoull(value);
            } catch (...) {
                throw ConfigError("config field 'seed': unsigned integer expected, got '" + value + "'");
            }
        } else if (key == "out_dir") out_dir = value;
        else if (key == "world.width") world_width = to_int(5, 64);
        else if (key == "world.height") world_height = to_int(5, 64);
        else if (key == "world.wall_density") world_wall_density = to_double(0.0, 0.6);
        else if (key == "world.landmarks") world_landmarks = to_int(0, 9);
        else if (key == "world.min_goal_dist") world_min_goal_dist = to_int(1, 256);
        else if (key == "world.max_goal_dist") world_max_goal_dist = to_int(1, 4096);
        else if (key == "world.count_train") world_count_train = to_int(1, 100000);
        else if (key == "world.count_eval") world_count_eval = to_int(1, 100000);
        else if (key == "instr.regime") {
            if (value == "brief") instr_regime = InstructionMix::brief;
            else if (value == "verbose") instr_regime = InstructionMix::verbose;
            else if (value == "mixed") instr_regime = InstructionMix::mixed;
            else throw ConfigError("config field 'instr.regime': expected brief|verbose|mixed, got '" + value + "'");
        } else if (key == "obs.view_cells") obs_view_cells = to_int(2, 32);
        else if (key == "obs.cell_px") obs_cell_px = to_int(1, 32);
        else if (key == "enc.patch") enc_patch = to_int(1, 32);
        else if (key == "enc.dim") enc_dim = to_int(4, 512);
        else if (key == "enc.stride") enc_stride = to_int(1, 64);
        else if (key == "enc.window") enc_window = to_int(1, 64);
        else if (key == "enc.geo_cache_limit") enc_geo_cache = to_int(1, 256);
        else if (key == "mem.mode") {
            if (value != "progressive" && value != "recursive")
                throw ConfigError("config field 'mem.mode': expected progressive|recursive, got '" + value + "'");
            mem_mode = value;
        } else if (key == "mem.group_size") mem_group_size = to_int(1, 16);
        else if (key == "mem.sentinels") mem_sentinels = to_int(1, 256);
        else if (key == "policy.layers") policy_layers = to_int(1, 8);
        else if (key == "policy.heads") policy_heads = to_int(1, 16);
        else if (key == "policy.horizon") policy_horizon = to_int(1, 8);
        else if (key == "policy.max_instr") policy_max_instr = to_int(8, 512);
        else if (key == "sched.mode") {
            if (value != "constant" && value != "dynamic")
                throw ConfigError("config field 'sched.mode': expected constant|dynamic, got '" + value + "'");
            sched_mode = value;
        } else if (key == "sched.beta") sched_beta = to_double(0.0, 1.0);
        else if (key == "sched.alpha") sched_alpha = to_double(1e-9, 1.0 - 1e-9);
        else if (key == "train.chunk_len") train_chunk_len = to_int(1, 16);
        else if (key == "train.batch") train_batch = to_int(1, 256);
        else if (key == "train.epochs") train_epochs = to_int(0, 10000);
        else if (key == "train.lr") train_lr = to_double(0.0, 10.0);
        else if (key == "train.warmup_ratio") train_warmup_ratio = to_double(1e-6, 0.999);
        else if (key == "train.threads") train_threads = to_int(1, 64);
        else if (key == "eval.threshold") eval_threshold = to_double(1e-9, 64.0);
        else throw ConfigError("unknown config key '" + key + "'");
    }

    static RunConfig parse_text(const std::string& text) {
        RunConfig cfg;
        std::istringstream is(text);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            auto hash_pos = line.find('#');
            if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
            auto notspace = line.find_first_not_of(" \t\r");
            if (notspace == std::string::npos) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t\r");
                auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        cfg.validate();
        return cfg;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw MissingArtifact("config file not found: " + path);
        std::ostringstream os;
        os << is.rdbuf();
        return parse_text(os.str());
    }

    void validate() const {
        if (world_min_goal_dist > world_max_goal_dist)
            throw ConfigError("config: world.min_goal_dist exceeds world.max_goal_dist");
        int side = obs_view_cells * obs_cell_px;
        if (side % (2 * enc_patch) != 0)
            throw ConfigError("config: observation side " + std::to_string(side) +
                              " px not divisible by 2*enc.patch = " + std::to_string(2 * enc_patch));
        if (enc_dim % policy_heads != 0)
            throw ConfigError("config: enc.dim must be divisible by policy.heads");
        if (sched_mode == "dynamic") {
            dagger::MixedPolicySchedule::dynamic(sched_alpha);
        } else {
            dagger::MixedPolicySchedule::constant(sched_beta);
        }
    }

    // Canonical serialization; the manifest stores exactly this text and
    // its hash.
    std::string to_text() const {
        std::ostringstream os;
        os.precision(17);
        os << "seed = " << seed << "\n";
        os << "out_dir = " << out_dir << "\n";
        os << "world.width = " << world_width << "\n";
        os << "world.height = " << world_height << "\n";
        os << "world.wall_density = " << world_wall_density << "\n";
        os << "world.landmarks = " << world_landmarks << "\n";
        os << "world.min_goal_dist = " << world_min_goal_dist << "\n";
        os << "world.max_goal_dist = " << world_max_goal_dist << "\n";
        os << "world.count_train = " << world_count_train << "\n";
        os << "world.count_eval = " << world_count_eval << "\n";
        os << "instr.regime = "
           << (instr_regime == InstructionMix::brief ? "brief" : instr_regime == InstructionMix::verbose ? "verbose" : "mixed")
           << "\n";
        os << "obs.view_cells = " << obs_view_cells << "\n";
        os << "obs.cell_px = " << obs_cell_px << "\n";
        os << "enc.patch = " << enc_patch << "\n";
        os << "enc.dim = " << enc_dim << "\n";
        os << "enc.stride = " << enc_stride << "\n";
        os << "enc.window = " << enc_window << "\n";
        os << "enc.geo_cache_limit = " << enc_geo_cache << "\n";
        os << "mem.mode = " << mem_mode << "\n";
        os << "mem.group_size = " << mem_group_size << "\n";
        os << "mem.sentinels = " << mem_sentinels << "\n";
        os << "policy.layers = " << policy_layers << "\n";
        os << "policy.heads = " << policy_heads << "\n";
        os << "policy.horizon = " << policy_horizon << "\n";
        os << "policy.max_instr = " << policy_max_instr << "\n";
        os << "sched.mode = " << sched_mode << "\n";
        os << "sched.beta = " << sched_beta << "\n";
        os << "sched.alpha = " << sched_alpha << "\n";
        os << "train.chunk_len = " << train_chunk_len << "\n";
        os << "train.batch = " << train_batch << "\n";
        os << "train.epochs = " << train_epochs << "\n";
        os << "train.lr = " << train_lr << "\n";
        os << "train.warmup_ratio = " << train_warmup_ratio << "\n";
        os << "train.threads = " << train_threads << "\n";
        os << "eval.threshold = " << eval_threshold << "\n";
        return os.str();
    }

    std::string hash_hex() const { return hex64(fnv1a(to_text())); }

    // ---- derived module configurations ----

    env::WorldGenConfig world_gen() const {
        env::WorldGenConfig g;
        g.width = world_width;
        g.height = world_height;
        g.wall_density = world_wall_density;
        g.landmarks = world_landmarks;
        g.min_goal_dist = world_min_goal_dist;
        g.max_goal_dist = world_max_goal_dist;
        return g;
    }

    env::ObsConfig obs_cfg() const { return {obs_view_cells, obs_cell_px}; }

    enc::EncoderConfig enc_cfg() const {
        enc::EncoderConfig e;
        e.patch = enc_patch;
        e.dim = enc_dim;
        e.stride = enc_stride;
        e.window = enc_window;
        e.geo_cache_limit = enc_geo_cache;
        return e;
    }

    int obs_tokens() const {
        int side = obs_view_cells * obs_cell_px;
        return (side / (2 * enc_patch)) * (side / (2 * enc_patch));
    }

    policy::MemoryMode memory_mode() const { return policy::memory_mode_from(mem_mode); }

    policy::PolicyConfig policy_cfg(int base_vocab) const {
        policy::PolicyConfig p;
        p.layers = policy_layers;
        p.heads = policy_heads;
        p.dim = enc_dim;
        p.action_horizon = policy_horizon;
        p.memory_mode = memory_mode();
        p.sentinel_count = mem_sentinels;
        p.base_vocab = base_vocab;
        p.max_obs_tokens = obs_tokens();
        p.max_memory_tokens = p.memory_mode == policy::MemoryMode::recursive
                                  ? mem_sentinels
                                  : mem::progressive_budget(mem_group_size, obs_tokens());
        p.max_instruction_tokens = policy_max_instr;
        return p;
    }

    dagger::MixedPolicySchedule schedule() const {
        return sched_mode == "dynamic" ? dagger::MixedPolicySchedule::dynamic(sched_alpha)
                                       : dagger::MixedPolicySchedule::constant(sched_beta);
    }

    Pipeline pipeline(std::shared_ptr<const enc::Encoder> encoder) const {
        Pipeline p;
        p.obs = obs_cfg();
        p.encoder = std::move(encoder);
        p.mode = memory_mode();
        p.group_size = mem_group_size;
        p.sentinel_count = mem_sentinels;
        return p;
    }

    env::InstructionRegime regime_for_world(int index) const {
        switch (instr_regime) {
            case InstructionMix::brief: return env::InstructionRegime::brief;
            case InstructionMix::verbose: return env::InstructionRegime::verbose;
            default: return index % 2 == 0 ? env::InstructionRegime::brief : env::InstructionRegime::verbose;
        }
    }
};

}  // namespace navmem::run
