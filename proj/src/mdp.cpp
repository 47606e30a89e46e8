#include "cacherl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "cacherl/errors.hpp"

namespace cacherl {

namespace {

constexpr std::size_t kDenseLimit = 2000;

double tie_tolerance(double best) { return 1e-10 * (1.0 + std::fabs(best)); }

std::size_t greedy_action(const ExplicitMDP& mdp, std::size_t s, std::span<const double> value) {
    const std::size_t na = mdp.num_actions();
    std::vector<double> q(na);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < na; ++a) {
        q[a] = mdp.backup(s, a, value);
        best = std::min(best, q[a]);
    }
    const double tol = tie_tolerance(best);
    for (std::size_t a = 0; a < na; ++a)
        if (q[a] <= best + tol) return a;
    return 0;
}

}  // namespace

ExplicitMDP::ExplicitMDP(std::size_t num_states, std::size_t num_actions, double gamma,
                         const std::vector<std::vector<Transition>>& successors, std::vector<double> cost)
    : num_states_(num_states), num_actions_(num_actions), gamma_(gamma), cost_(std::move(cost)) {
    if (num_states == 0 || num_actions == 0) throw std::invalid_argument("ExplicitMDP: empty state or action set");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ExplicitMDP: gamma must lie in [0, 1)");
    if (successors.size() != num_states * num_actions || cost_.size() != num_states * num_actions)
        throw std::invalid_argument("ExplicitMDP: tables must have |S| x |A| entries");
    offsets_.reserve(successors.size() + 1);
    offsets_.push_back(0);
    for (const auto& row : successors) {
        long double total = 0.0L;
        for (const auto& t : row) {
            if (t.next >= num_states || !(t.prob >= 0.0)) throw std::invalid_argument("ExplicitMDP: bad transition");
            total += t.prob;
            transitions_.push_back(t);
        }
        if (std::fabs(static_cast<double>(total - 1.0L)) > 1e-12)
            throw std::invalid_argument("ExplicitMDP: transition row does not sum to 1");
        offsets_.push_back(transitions_.size());
    }
    for (double c : cost_)
        if (!std::isfinite(c)) throw std::invalid_argument("ExplicitMDP: non-finite cost");
}

double ExplicitMDP::backup(std::size_t s, std::size_t a, std::span<const double> value) const {
    double future = 0.0;
    for (const auto& t : successors(s, a)) future += t.prob * value[t.next];
    return cost(s, a) + gamma_ * future;
}

CachingMdp build_mdp(const PopularityChain& global, const PopularityChain& local, std::size_t files,
                     std::size_t capacity, const CostWeights& weights, double gamma) {
    if (global.num_files() != files || local.num_files() != files)
        throw std::invalid_argument("build_mdp: chain length != files");
    const std::uint64_t num_actions = binomial(files, capacity);
    const std::uint64_t num_states = global.num_states() * local.num_states() * num_actions;
    if (num_actions > kMaxStateActionPairs || num_states > kMaxStateActionPairs / num_actions)
        throw CapacityError("build_mdp: more than 1e6 state-action pairs");

    CachingMdp out{ExplicitMDP{}, enumerate_actions(files, capacity), global.num_states(), local.num_states()};
    const auto& acts = out.actions;
    const std::size_t ng = global.num_states(), nl = local.num_states(), na = acts.size();
    const std::size_t ns = ng * nl * na;

    std::vector<std::vector<Transition>> succ(ns * na);
    std::vector<double> cost(ns * na);
    for (std::size_t g = 0; g < ng; ++g) {
        for (std::size_t l = 0; l < nl; ++l) {
            for (std::size_t prev = 0; prev < na; ++prev) {
                const std::size_t s = out.state_index(g, l, prev);
                for (std::size_t a = 0; a < na; ++a) {
                    auto& row = succ[s * na + a];
                    row.reserve(ng * nl);
                    double expected = 0.0;
                    for (std::size_t g2 = 0; g2 < ng; ++g2) {
                        for (std::size_t l2 = 0; l2 < nl; ++l2) {
                            const double p = global.transition(g, g2) * local.transition(l, l2);
                            if (p == 0.0) continue;
                            row.push_back({static_cast<std::uint32_t>(out.state_index(g2, l2, a)), p});
                            expected += p * aggregate_cost(acts[prev], acts[a], global.state(g2), local.state(l2), weights);
                        }
                    }
                    cost[s * na + a] = expected;
                }
            }
        }
    }
    out.mdp = ExplicitMDP(ns, na, gamma, succ, std::move(cost));
    return out;
}

ValueTable policy_evaluation(const ExplicitMDP& mdp, std::span<const std::size_t> policy) {
    const std::size_t n = mdp.num_states();
    if (policy.size() != n) throw std::invalid_argument("policy_evaluation: policy size != |S|");
    for (auto a : policy)
        if (a >= mdp.num_actions()) throw std::invalid_argument("policy_evaluation: action index out of range");

    ValueTable out;
    out.policy.assign(policy.begin(), policy.end());
    if (n <= kDenseLimit) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::VectorXd b(static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < n; ++s) {
            const auto i = static_cast<Eigen::Index>(s);
            b(i) = mdp.cost(s, policy[s]);
            for (const auto& t : mdp.successors(s, policy[s])) A(i, static_cast<Eigen::Index>(t.next)) -= mdp.gamma() * t.prob;
        }
        const Eigen::VectorXd v = A.partialPivLu().solve(b);
        if (!v.allFinite()) throw NumericalError("policy_evaluation: singular Bellman system");
        out.value.assign(v.data(), v.data() + n);
        return out;
    }

    // Gauss-Seidel sweeps; contraction modulus gamma.
    out.value.assign(n, 0.0);
    for (int sweep = 0; sweep < 1'000'000; ++sweep) {
        double diff = 0.0, scale = 1.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double v = mdp.backup(s, policy[s], out.value);
            diff = std::max(diff, std::fabs(v - out.value[s]));
            scale = std::max(scale, std::fabs(v));
            out.value[s] = v;
        }
        if (!std::isfinite(diff)) throw NumericalError("policy_evaluation: diverged");
        if (diff <= 1e-14 * scale) return out;
    }
    throw NumericalError("policy_evaluation: sweeps did not converge");
}

ValueTable policy_iteration(const ExplicitMDP& mdp) {
    const std::size_t n = mdp.num_states();
    std::vector<std::size_t> policy(n, 0);
    ValueTable table = policy_evaluation(mdp, policy);
    // Policy iteration terminates in far fewer steps than this in practice.
    for (int iter = 0; iter < 100000; ++iter) {
        bool changed = false;
        for (std::size_t s = 0; s < n; ++s) {
            const double current = mdp.backup(s, policy[s], table.value);
            const std::size_t candidate = greedy_action(mdp, s, table.value);
            if (candidate != policy[s] && mdp.backup(s, candidate, table.value) < current - tie_tolerance(current)) {
                policy[s] = candidate;
                changed = true;
            }
        }
        if (!changed) {
            // Canonicalize ties to the lowest index; V is unchanged up to the tie tolerance.
            for (std::size_t s = 0; s < n; ++s) policy[s] = greedy_action(mdp, s, table.value);
            return policy_evaluation(mdp, policy);
        }
        table = policy_evaluation(mdp, policy);
    }
    throw NumericalError("policy_iteration: no convergence");
}

ValueTable value_iteration(const ExplicitMDP& mdp, double tol) {
    const std::size_t n = mdp.num_states();
    std::vector<double> v(n, 0.0), next(n);
    while (true) {
        double diff = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) best = std::min(best, mdp.backup(s, a, v));
            next[s] = best;
            diff = std::max(diff, std::fabs(best - v[s]));
        }
        v.swap(next);
        if (!std::isfinite(diff)) throw NumericalError("value_iteration: diverged");
        if (diff <= tol) break;
    }
    ValueTable out{v, std::vector<std::size_t>(n)};
    for (std::size_t s = 0; s < n; ++s) out.policy[s] = greedy_action(mdp, s, v);
    return out;
}

double bellman_residual(const ExplicitMDP& mdp, std::span<const double> value, std::span<const std::size_t> policy) {
    double worst = 0.0;
    for (std::size_t s = 0; s < mdp.num_states(); ++s)
        worst = std::max(worst, std::fabs(mdp.backup(s, policy[s], value) - value[s]));
    return worst;
}

std::vector<double> q_values(const ExplicitMDP& mdp, std::span<const double> value) {
    std::vector<double> q(mdp.num_states() * mdp.num_actions());
    for (std::size_t s = 0; s < mdp.num_states(); ++s)
        for (std::size_t a = 0; a < mdp.num_actions(); ++a) q[s * mdp.num_actions() + a] = mdp.backup(s, a, value);
    return q;
}

nlohmann::json value_table_to_json(const CachingMdp& problem, const ValueTable& table) {
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : problem.actions.actions()) actions.push_back(a.indices());
    return {
        {"layout", "row-major (global, local, action)"},
        {"gamma", problem.mdp.gamma()},
        {"global_states", problem.global_states},
        {"local_states", problem.local_states},
        {"actions", std::move(actions)},
        {"value", table.value},
        {"policy", table.policy},
    };
}

}  // namespace cacherl
