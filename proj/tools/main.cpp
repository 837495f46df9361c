#include "navmem/run/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using navmem::run::ConfigError;
using navmem::run::MissingArtifact;
using navmem::run::RunConfig;

// --config file first, then --set key=value overrides in order.
RunConfig load_config(const std::string& config_path, const std::vector<std::string>& overrides,
                      const std::string& out_dir) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"navmem: token-budgeted memory and DAgger training on a gridworld navigation task"};
    app.require_subcommand(1);

    std::string config_path, out_dir, worlds, vocab, checkpoint, store;
    std::vector<std::string> overrides;
    bool sweep = false, oracle = false;
    std::vector<std::string> manifests;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file (key = value lines)");
        cmd->add_option("--set", overrides, "override a config key, e.g. --set seed=7")->take_all();
        cmd->add_option("--out-dir", out_dir, "output directory (overrides out_dir)");
    };

    CLI::App* gen = app.add_subcommand("gen-worlds", "generate train/eval world pools and the vocabulary");
    add_common(gen);

    CLI::App* train = app.add_subcommand("train", "stage-1 behavior cloning on oracle trajectories");
    add_common(train);
    train->add_option("--worlds", worlds, "training worlds file")->required();
    train->add_option("--vocab", vocab, "vocabulary file")->required();

    CLI::App* dag = app.add_subcommand("dagger", "mixed-policy collection, aggregation, and retraining");
    add_common(dag);
    dag->add_option("--worlds", worlds, "training worlds file")->required();
    dag->add_option("--vocab", vocab, "vocabulary file")->required();
    dag->add_option("--checkpoint", checkpoint, "stage-1 checkpoint")->required();
    dag->add_option("--store", store, "stage-1 trajectory store")->required();
    dag->add_flag("--sweep", sweep, "also collect with beta in {0.75,0.5,0.25} and dynamic alpha=0.5");

    CLI::App* ev = app.add_subcommand("eval", "greedy evaluation rollouts and the metric report");
    add_common(ev);
    ev->add_option("--worlds", worlds, "evaluation worlds file")->required();
    ev->add_option("--vocab", vocab, "vocabulary file")->required();
    ev->add_option("--checkpoint", checkpoint, "policy checkpoint");
    ev->add_flag("--oracle", oracle, "evaluate the oracle policy instead of a checkpoint");

    CLI::App* plot = app.add_subcommand("plot", "comparison figures and data files from run manifests");
    plot->add_option("--out-dir", out_dir, "output directory")->required();
    plot->add_option("manifests", manifests, "manifest.json paths")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) {
            RunConfig cfg = load_config(config_path, overrides, out_dir);
            auto res = navmem::run::cmd_gen_worlds(cfg);
            std::cout << "worlds written: " << res.train_path << " " << res.eval_path << "\n"
                      << "vocabulary: " << res.vocab_path << "\n";
        } else if (train->parsed()) {
            RunConfig cfg = load_config(config_path, overrides, out_dir);
            auto res = navmem::run::cmd_train(cfg, worlds, vocab);
            std::cout << "checkpoint: " << res.checkpoint_path << "\nstore: " << res.store_path
                      << "\nmanifest: " << res.manifest_path << "\nfinal loss " << res.final_loss
                      << ", plan accuracy " << res.accuracy << "\n";
        } else if (dag->parsed()) {
            RunConfig cfg = load_config(config_path, overrides, out_dir);
            auto res = navmem::run::cmd_dagger(cfg, worlds, vocab, checkpoint, store, sweep);
            std::cout << "checkpoint: " << res.checkpoint_path << "\nstore: " << res.store_path
                      << "\nmanifest: " << res.manifest_path << "\nmean collected trajectory length "
                      << res.mean_train_steps << "\n";
        } else if (ev->parsed()) {
            RunConfig cfg = load_config(config_path, overrides, out_dir);
            if (!oracle && checkpoint.empty()) throw MissingArtifact("eval needs --checkpoint or --oracle");
            auto res = navmem::run::cmd_eval(cfg, worlds, vocab, checkpoint, oracle);
            std::cout << navmem::run::report_table(res.report) << "manifest: " << res.manifest_path << "\n";
        } else if (plot->parsed()) {
            if (navmem::run::cmd_plot(manifests, out_dir) != 0) {
                std::cerr << "plot: no readable manifests\n";
                return 3;
            }
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
