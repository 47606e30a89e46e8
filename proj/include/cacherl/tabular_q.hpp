#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "cacherl/action.hpp"
#include "cacherl/mdp.hpp"
#include "cacherl/rng.hpp"
#include "cacherl/schedule.hpp"
#include "cacherl/single_node.hpp"

namespace cacherl {

/// Dense |S| x |A| table of cost-to-go estimates, zero-initialized.
class QTable {
public:
    QTable() = default;
    QTable(std::size_t num_states, std::size_t num_actions)
        : states_(num_states), actions_(num_actions), q_(num_states * num_actions, 0.0) {}

    std::size_t num_states() const noexcept { return states_; }
    std::size_t num_actions() const noexcept { return actions_; }
    double& operator()(std::size_t s, std::size_t a) { return q_[s * actions_ + a]; }
    double operator()(std::size_t s, std::size_t a) const { return q_[s * actions_ + a]; }
    const std::vector<double>& data() const noexcept { return q_; }

    /// Lowest action index attaining the row minimum.
    std::size_t argmin(std::size_t s) const;
    double min(std::size_t s) const { return (*this)(s, argmin(s)); }

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> q_;
};

/// Epsilon-greedy over action indices: argmin of the row w.p. 1 − ε,
/// otherwise a uniformly random index.
std::size_t select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng);

/// Q(s_prev, a) ← (1 − β) Q(s_prev, a) + β (cost + γ min_α Q(s_new, α)).
void q_update(QTable& q, std::size_t s_prev, std::size_t action, double cost, std::size_t s_new, double beta,
              double gamma);

/// Row index of the environment's current observed state, laid out as in CachingMdp.
std::size_t tabular_state_index(const SingleNodeEnv& env, const ActionSet& actions);

struct TabularQResult {
    QTable table;
    std::vector<double> costs;  // per-slot incurred cost
};

/// Runs exact Q-learning for `num_slots` slots on `env`.
TabularQResult run_q_learning(SingleNodeEnv& env, const StepSchedule& step, const EpsilonSchedule& explore,
                              double gamma, std::uint64_t num_slots, Rng& rng);

/// Q-learning against a tabulated MDP, drawing successors from its transition
/// lists and charging the expected cost C̄(s, a). Used to check convergence to
/// the Q* the oracle computes.
QTable q_learning_on_mdp(const ExplicitMDP& mdp, std::size_t start_state, const StepSchedule& step,
                         const EpsilonSchedule& explore, std::uint64_t num_steps, Rng& rng);

nlohmann::json qtable_to_json(const QTable& q);

}  // namespace cacherl
