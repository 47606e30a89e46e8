#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cacherl/action.hpp"
#include "cacherl/popularity.hpp"
#include "cacherl/single_node.hpp"

namespace cacherl {

struct Transition {
    std::uint32_t next = 0;
    double prob = 0.0;
};

/// Finite discounted MDP in tabulated form: for every (state, action) a list of
/// successors with probabilities, and the expected one-step cost.
class ExplicitMDP {
public:
    ExplicitMDP() = default;
    /// `successors[s * num_actions + a]` lists the successors of (s, a);
    /// `cost` is row-major |S| x |A|. Rows must sum to 1 within 1e-12.
    ExplicitMDP(std::size_t num_states, std::size_t num_actions, double gamma,
                const std::vector<std::vector<Transition>>& successors, std::vector<double> cost);

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double gamma() const noexcept { return gamma_; }
    double cost(std::size_t s, std::size_t a) const { return cost_[s * num_actions_ + a]; }
    std::span<const Transition> successors(std::size_t s, std::size_t a) const {
        const std::size_t k = s * num_actions_ + a;
        return std::span<const Transition>(transitions_).subspan(offsets_[k], offsets_[k + 1] - offsets_[k]);
    }
    /// C̄(s, a) + γ Σ P V.
    double backup(std::size_t s, std::size_t a, std::span<const double> value) const;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    double gamma_ = 0.0;
    std::vector<std::size_t> offsets_;
    std::vector<Transition> transitions_;
    std::vector<double> cost_;
};

/// The single-node caching problem as an explicit MDP.
///
/// States are (global index, local index, cached action) laid out row-major,
/// i.e. index = (g * |P_L| + l) * |A| + action index. Taking action a from any
/// state lands in (g', l', a) with probability T_G[g, g'] * T_L[l, l'].
struct CachingMdp {
    ExplicitMDP mdp;
    ActionSet actions;
    std::size_t global_states = 0;
    std::size_t local_states = 0;

    std::size_t state_index(std::size_t g, std::size_t l, std::size_t action_idx) const {
        return (g * local_states + l) * actions.size() + action_idx;
    }
};

inline constexpr std::uint64_t kMaxStateActionPairs = 1'000'000;

/// Throws CapacityError when |S|·|A| exceeds kMaxStateActionPairs.
CachingMdp build_mdp(const PopularityChain& global, const PopularityChain& local, std::size_t files,
                     std::size_t capacity, const CostWeights& weights, double gamma);

struct ValueTable {
    std::vector<double> value;
    std::vector<std::size_t> policy;
};

/// Solves V = C̄_π + γ P_π V. Dense LU up to 2000 states, sweeps beyond.
ValueTable policy_evaluation(const ExplicitMDP& mdp, std::span<const std::size_t> policy);

/// Exact optimum by policy iteration. The returned policy picks the lowest
/// action index among the minimizers of the one-step lookahead.
ValueTable policy_iteration(const ExplicitMDP& mdp);

/// Independent cross-check: iterate the optimality operator until successive
/// iterates differ by at most `tol` in sup-norm.
ValueTable value_iteration(const ExplicitMDP& mdp, double tol = 1e-10);

/// max_s |C̄(s, π(s)) + γ Σ P V − V(s)|.
double bellman_residual(const ExplicitMDP& mdp, std::span<const double> value, std::span<const std::size_t> policy);

/// Q(s, a) = C̄(s, a) + γ Σ P V, row-major |S| x |A|.
std::vector<double> q_values(const ExplicitMDP& mdp, std::span<const double> value);

nlohmann::json value_table_to_json(const CachingMdp& problem, const ValueTable& table);

}  // namespace cacherl
