// Command-line front end for the caching experiments.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cacherl/errors.hpp"
#include "cacherl/experiment.hpp"
#include "cacherl/mdp.hpp"

namespace fs = std::filesystem;
using namespace cacherl;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

fs::path default_out_dir() {
    if (const char* env = std::getenv("CACHERL_OUT_DIR"); env && *env) return env;
    return "results";
}

fs::path resolve_out_dir(const std::string& flag, const ExperimentConfig* config) {
    if (!flag.empty()) return flag;
    if (config && !config->output_dir.empty()) return config->output_dir;
    return default_out_dir();
}

ExperimentConfig load_with_override(const std::string& path, const std::vector<std::uint64_t>& seeds) {
    ExperimentConfig cfg = load_config(path);
    if (!seeds.empty()) {
        cfg.seeds = seeds;
        cfg.validate();
    }
    return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cacherl: reinforcement-learning caching simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, reference = "nocache";
    std::vector<std::uint64_t> seed_override;
    unsigned threads = 1;
    std::vector<std::string> records;
    std::size_t samples = 100;
    std::uint64_t sample_seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed-override", seed_override, "Replace the config's seed list");
        sub->add_option("--out-dir", out_dir, "Output directory (default: $CACHERL_OUT_DIR or ./results)");
        sub->add_option("--threads", threads, "Worker threads for seeds")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "Run an experiment config and write CSV and JSON outputs");
    run->add_option("config", config_path, "Config file")->required();
    add_common(run);

    auto* compare = app.add_subcommand("compare", "Summarize run CSVs against a reference policy");
    compare->add_option("records", records, "CSV files written by run")->required();
    compare->add_option("--reference", reference, "Reference column for reduced cost");
    compare->add_option("--samples", samples, "Steps sampled for the CDF");
    compare->add_option("--sample-seed", sample_seed, "Seed for CDF sampling");
    add_common(compare);

    auto* oracle = app.add_subcommand("oracle", "Solve the single-node problem exactly and dump V* and the policy");
    oracle->add_option("config", config_path, "Config file")->required();
    add_common(oracle);

    auto* validate = app.add_subcommand("validate", "Check a config and print its expanded form");
    validate->add_option("config", config_path, "Config file")->required();
    add_common(validate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*validate) {
            const auto cfg = load_with_override(config_path, seed_override);
            nlohmann::json doc = config_to_json(cfg);
            doc["config_hash"] = hash_hex(config_hash(cfg));
            std::cout << doc.dump(2) << "\n";
            return kOk;
        }
        if (*run) {
            const auto cfg = load_with_override(config_path, seed_override);
            const fs::path dir = resolve_out_dir(out_dir, &cfg);
            const auto results = run_experiment(cfg, threads);
            for (const auto& p : write_outputs(cfg, results, dir)) std::cout << p.string() << "\n";
            return kOk;
        }
        if (*oracle) {
            const auto cfg = load_with_override(config_path, seed_override);
            if (cfg.single.files > ActionSet::kMaxFiles)
                throw ConfigError("single_node.files", "exact methods support at most 20 files");
            const fs::path dir = resolve_out_dir(out_dir, &cfg);
            fs::create_directories(dir);
            for (auto seed : cfg.seeds) {
                const auto problem = make_single_mdp(cfg, seed);
                const auto table = policy_iteration(problem.mdp);
                auto doc = value_table_to_json(problem, table);
                doc["seed"] = seed;
                doc["bellman_residual"] = bellman_residual(problem.mdp, table.value, table.policy);
                doc["config_hash"] = hash_hex(config_hash(cfg));
                const fs::path p = dir / (cfg.name + "_oracle_seed" + std::to_string(seed) + ".json");
                write_text(p, doc.dump(2) + "\n");
                std::cout << p.string() << "\n";
            }
            return kOk;
        }
        if (*compare) {
            std::vector<RunRecord> loaded;
            std::vector<std::string> labels;
            for (const auto& r : records) {
                loaded.push_back(read_csv(r));
                labels.push_back(fs::path(r).stem().string());
            }
            const auto result = compare_policies(loaded, labels, reference, samples, sample_seed);
            const fs::path dir = resolve_out_dir(out_dir, nullptr);
            fs::create_directories(dir);
            write_text(dir / "compare_summary.json", result.summary.dump(2) + "\n");
            write_text(dir / "compare_cdf.csv", result.cdf_csv);
            std::cout << result.summary.dump(2) << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
