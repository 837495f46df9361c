#pragma once

#include "navmem/core/hash.hpp"
#include "navmem/run/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace navmem::run {

constexpr const char* kCodeVersion = "0.1.0";

// Per-run record: the exact config text and its hash, phase timings,
// artifact paths, and the final metric table. Written atomically at run
// end. Timings vary between runs; determinism checks compare the metric
// table and config hash.
struct RunManifest {
    std::string config_text;
    std::string config_hash;
    std::string code_version = kCodeVersion;
    std::map<std::string, double> timings;
    std::map<std::string, std::string> artifacts;
    std::map<std::string, double> metrics;
    nlohmann::json tables = nlohmann::json::object();

    static RunManifest for_config(const RunConfig& cfg) {
        RunManifest m;
        m.config_text = cfg.to_text();
        m.config_hash = cfg.hash_hex();
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config_text"] = config_text;
        j["config_hash"] = config_hash;
        j["code_version"] = code_version;
        j["timings"] = timings;
        j["artifacts"] = artifacts;
        j["metrics"] = metrics;
        j["tables"] = tables;
        return j;
    }

    static RunManifest from_json(const nlohmann::json& j) {
        RunManifest m;
        m.config_text = j.at("config_text").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.code_version = j.at("code_version").get<std::string>();
        m.timings = j.at("timings").get<std::map<std::string, double>>();
        m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        m.metrics = j.at("metrics").get<std::map<std::string, double>>();
        if (j.contains("tables")) m.tables = j.at("tables");
        if (m.config_hash != hex64(fnv1a(m.config_text)))
            throw std::runtime_error("manifest: config hash does not match stored config text");
        return m;
    }

    // write-then-rename so a manifest is either absent or complete
    void save_atomic(const std::string& path) const {
        if (config_hash != hex64(fnv1a(config_text)))
            throw std::logic_error("manifest: refusing to write a hash that mismatches the config text");
        for (const auto& [name, p] : artifacts)
            if (!std::filesystem::exists(p))
                throw std::runtime_error("manifest: artifact '" + name + "' missing on disk: " + p);
        std::string tmp = path + ".tmp";
        {
            std::ofstream os(tmp, std::ios::trunc);
            if (!os) throw std::runtime_error("cannot write manifest: " + tmp);
            os << to_json().dump(2) << "\n";
        }
        std::filesystem::rename(tmp, path);
    }

    static RunManifest load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw MissingArtifact("manifest not found: " + path);
        nlohmann::json j;
        is >> j;
        return from_json(j);
    }
};

}  // namespace navmem::run
