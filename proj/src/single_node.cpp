#include "cacherl/single_node.hpp"

#include <cmath>
#include <stdexcept>

#include "cacherl/errors.hpp"

namespace cacherl {

void EnvConfig::validate() const {
    if (files == 0) throw std::invalid_argument("files must be >= 1");
    if (capacity > files) throw std::invalid_argument("capacity must be <= files");
    if (weights.refresh < 0 || weights.local_miss < 0 || weights.global_miss < 0)
        throw std::invalid_argument("cost weights must be nonnegative");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (global.num_states() == 0 || local.num_states() == 0) throw std::invalid_argument("popularity chains are empty");
    if (global.num_files() != files || local.num_files() != files)
        throw std::invalid_argument("popularity chain length != files");
}

namespace {

double uncached_mass(const ActionVector& a, const ProbVector& p) {
    if (a.size() != p.size()) throw std::invalid_argument("cost: action/profile length mismatch");
    double s = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f)
        if (!a.cached(f)) s += p[f];
    return s;
}

}  // namespace

double refresh_cost(const ActionVector& a_new, const ActionVector& a_old, double weight) {
    return weight * static_cast<double>(a_new.fetched_from(a_old));
}

double local_miss_cost(const ActionVector& a, const ProbVector& local, double weight) {
    return weight * uncached_mass(a, local);
}

double global_miss_cost(const ActionVector& a, const ProbVector& global, double weight) {
    return weight * uncached_mass(a, global);
}

double aggregate_cost(const ActionVector& a_old, const ActionVector& a_new, const ProbVector& global_next,
                      const ProbVector& local_next, const CostWeights& w) {
    const double c1 = refresh_cost(a_new, a_old, w.refresh);
    const double c2 = local_miss_cost(a_new, local_next, w.local_miss);
    const double c3 = global_miss_cost(a_new, global_next, w.global_miss);
    return (c1 + c2) + c3;
}

SingleNodeEnv::SingleNodeEnv(EnvConfig config, Rng rng) : config_(std::move(config)), rng_(rng) {
    config_.validate();
    state_.global_idx = rng_.below(config_.global.num_states());
    state_.local_idx = rng_.below(config_.local.num_states());
    state_.action = random_action(config_.files, config_.capacity, rng_);
    global_profile_ = config_.global.state(state_.global_idx);
    local_profile_ = config_.local.state(state_.local_idx);
    reveal_local();
}

void SingleNodeEnv::reveal_local() {
    if (config_.reveal == RevealMode::ChainState) {
        local_profile_ = config_.local.state(state_.local_idx);
        observed_local_ = state_.local_idx;
        return;
    }
    const auto requests = sample_requests(config_.local.state(state_.local_idx), config_.requests_per_slot, rng_);
    try {
        local_profile_ = empirical_profile(requests);
    } catch (const NoRequestsError&) {
        // Keep the previous profile.
    }
    observed_local_ = nearest_state(config_.local, local_profile_);
}

StepResult SingleNodeEnv::step(const ActionVector& a_new) {
    if (a_new.size() != config_.files || a_new.capacity() != config_.capacity)
        throw std::invalid_argument("env_step: action shape does not match the environment");
    state_.global_idx = step_chain(config_.global, state_.global_idx, rng_);
    state_.local_idx = step_chain(config_.local, state_.local_idx, rng_);
    global_profile_ = config_.global.state(state_.global_idx);
    reveal_local();

    const double cost = aggregate_cost(state_.action, a_new, global_profile_, local_profile_, config_.weights);
    state_.action = a_new;
    return StepResult{state_, cost, global_profile_, local_profile_};
}

}  // namespace cacherl
