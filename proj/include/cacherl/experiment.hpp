#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cacherl/dqn.hpp"
#include "cacherl/linear_q.hpp"
#include "cacherl/mdp.hpp"
#include "cacherl/schedule.hpp"
#include "cacherl/single_node.hpp"
#include "cacherl/two_tier.hpp"

namespace cacherl {

enum class Scenario { SingleNodeTabular, SingleNodeLinear, SingleNodeOracle, NetworkDqn, NetworkBaselines };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// How a popularity chain is obtained: explicit Zipf exponents, a random draw, or a chain file.
struct ChainSpec {
    enum class Kind { Etas, Random, File };
    Kind kind = Kind::Etas;
    std::vector<double> etas;
    std::size_t states = 2;
    double eta_lo = 0.0;
    double eta_hi = 0.0;
    std::string file;

    static ChainSpec zipf(std::vector<double> exponents) {
        ChainSpec c;
        c.etas = std::move(exponents);
        return c;
    }

    PopularityChain build(std::size_t files, Rng& rng) const;
};

struct SingleNodeSpec {
    std::size_t files = 10;
    std::size_t capacity = 2;
    CostWeights weights;
    double gamma = 0.9;
    std::uint64_t requests_per_slot = 100;
    RevealMode reveal = RevealMode::ChainState;
    ChainSpec global = ChainSpec::zipf({1.0, 1.5});
    ChainSpec local = ChainSpec::zipf({0.7, 2.5});
    std::optional<std::uint64_t> instance_seed;  // fixes the chains across seeds
};

struct TabularSpec {
    StepSchedule step = StepSchedule::constant(0.8);
    EpsilonSchedule epsilon = EpsilonSchedule::constant(0.05);
};

struct LinearSpec {
    StepSizes steps;
    EpsilonSchedule epsilon = EpsilonSchedule::constant(0.05);
};

struct DqnSpec {
    DqnConfig net;
    std::size_t groups = 5;
    double lr = 1e-3;
    std::size_t batch = 32;
    std::size_t replay_capacity = 10000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double anneal_fraction = 0.2;
    double cost_scale = 0.0;   // divisor for stored costs; 0 means requests_per_slot
    double state_scale = 0.0;  // divisor for network inputs; 0 means requests_per_slot
};

struct ExperimentConfig {
    std::string name = "experiment";
    Scenario scenario = Scenario::SingleNodeTabular;
    std::vector<std::uint64_t> seeds{1};
    std::uint64_t steps = 1000;
    std::string output_dir;
    bool oracle_column = false;
    SingleNodeSpec single;
    TabularSpec tabular;
    LinearSpec linear;
    NetworkConfig network;
    DqnSpec dqn;
    std::vector<std::string> baselines{"lru", "lfu", "fifo", "optimal", "nocache"};

    /// Checks every module invariant; throws ConfigError naming the field.
    void validate() const;
};

/// Names accepted by preset(): s1 .. s6, s2-decay, small, large, network-n5, network-n10, network-n50.
std::vector<std::string> preset_names();
nlohmann::json preset(const std::string& name);

/// Parses a config document. A "preset" key seeds the defaults; the document is merged on top.
/// Unknown keys are rejected with ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical, fully expanded form of a config.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// FNV-1a 64 over the canonical JSON text.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t h);

/// One trace: a primary cost column plus optional per-policy columns.
struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<double> cost;
    std::vector<std::string> policy_names;
    std::vector<std::vector<double>> policies;  // [policy][step]
    nlohmann::json summary;

    std::size_t steps() const noexcept { return cost.size(); }
};

/// Runs one seed. Bit-reproducible per (config, seed).
RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed);

/// Runs every seed, fanned out over `threads` workers, returned in seed order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, unsigned threads = 1);

/// Column-wise mean across seeds.
RunRecord mean_trace(const std::vector<RunRecord>& records);

/// step,cost,run_mean[,policy...] with 17 significant digits and LF endings.
std::string to_csv(const RunRecord& record);
RunRecord read_csv(const std::filesystem::path& path);

/// Writes <name>_seed<k>.csv, <name>_mean.csv and <name>_summary.json. Returns the written paths.
std::vector<std::filesystem::path> write_outputs(const ExperimentConfig& config, const std::vector<RunRecord>& records,
                                                 const std::filesystem::path& dir);

/// Costs of the oracle policy driving `env` for `steps` slots.
std::vector<double> simulate_policy(SingleNodeEnv& env, const CachingMdp& problem, std::span<const std::size_t> policy,
                                    std::uint64_t steps);

/// The single-node environment and its exact problem for one seed.
SingleNodeEnv make_single_env(const ExperimentConfig& config, std::uint64_t seed);
CachingMdp make_single_mdp(const ExperimentConfig& config, std::uint64_t seed);

struct CompareResult {
    nlohmann::json summary;
    std::string cdf_csv;  // policy,reduced_cost,cdf
};

/// Per-policy mean cost and reduced cost against `reference`, plus an empirical CDF of
/// the reduced cost at `samples` steps drawn uniformly without replacement with `seed`.
CompareResult compare_policies(const std::vector<RunRecord>& records, const std::vector<std::string>& labels,
                               const std::string& reference, std::size_t samples = 100, std::uint64_t seed = 0);

/// Mean of v over [from, to).
double mean_of(std::span<const double> v, std::size_t from, std::size_t to);

}  // namespace cacherl
