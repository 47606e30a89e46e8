#pragma once

#include <cstddef>
#include <cstdint>

#include "cacherl/action.hpp"
#include "cacherl/popularity.hpp"
#include "cacherl/rng.hpp"

namespace cacherl {

/// Weights of the refresh, local-miss and global-miss cost terms.
struct CostWeights {
    double refresh = 0.0;      // per newly fetched file
    double local_miss = 0.0;   // per unit of uncached local popularity mass
    double global_miss = 0.0;  // per unit of uncached global popularity mass
};

/// Snapshot of the single-node system: which profile each chain is in, plus
/// the cache contents.
struct SystemState {
    std::size_t global_idx = 0;
    std::size_t local_idx = 0;
    ActionVector action;
};

/// How the local profile is revealed each slot.
enum class RevealMode {
    ChainState,  // the exact chain state
    Empirical,   // empirical profile of `requests_per_slot` sampled requests
};

struct EnvConfig {
    std::size_t files = 0;
    std::size_t capacity = 0;
    CostWeights weights;
    double gamma = 0.9;
    PopularityChain global;
    PopularityChain local;
    std::uint64_t requests_per_slot = 100;
    RevealMode reveal = RevealMode::ChainState;

    /// Throws std::invalid_argument on the first violated invariant.
    void validate() const;
};

double refresh_cost(const ActionVector& a_new, const ActionVector& a_old, double weight);
double local_miss_cost(const ActionVector& a, const ProbVector& local, double weight);
double global_miss_cost(const ActionVector& a, const ProbVector& global, double weight);

/// Refresh + local miss + global miss, summed in that order, with the
/// profiles revealed in the slot the new action serves.
double aggregate_cost(const ActionVector& a_old, const ActionVector& a_new, const ProbVector& global_next,
                      const ProbVector& local_next, const CostWeights& w);

inline double aggregate_cost(const SystemState& prev, const ActionVector& a_new, const ProbVector& global_next,
                             const ProbVector& local_next, const CostWeights& w) {
    return aggregate_cost(prev.action, a_new, global_next, local_next, w);
}

struct StepResult {
    SystemState state;
    double cost = 0.0;
    ProbVector global_profile;
    ProbVector local_profile;
};

/// Single cache fed by a global and a local popularity chain.
///
/// Chain evolution does not depend on the actions, so two environments built
/// from the same config and generator see the same profile trajectory
/// whatever policy drives them.
class SingleNodeEnv {
public:
    /// The initial state draws both chain indices and the cache contents at random.
    SingleNodeEnv(EnvConfig config, Rng rng);

    const EnvConfig& config() const noexcept { return config_; }
    const SystemState& state() const noexcept { return state_; }
    const ProbVector& global_profile() const noexcept { return global_profile_; }
    const ProbVector& local_profile() const noexcept { return local_profile_; }

    /// Profile-state indices as the agent identifies them. In empirical mode
    /// the local index is the chain state nearest the revealed profile.
    std::size_t observed_global_index() const noexcept { return state_.global_idx; }
    std::size_t observed_local_index() const noexcept { return observed_local_; }

    /// Advance one slot under `a_new`.
    StepResult step(const ActionVector& a_new);

private:
    void reveal_local();

    EnvConfig config_;
    Rng rng_;
    SystemState state_;
    ProbVector global_profile_;
    ProbVector local_profile_;
    std::size_t observed_local_ = 0;
};

}  // namespace cacherl
