#include "cacherl/tabular_q.hpp"

#include <stdexcept>

namespace cacherl {

std::size_t QTable::argmin(std::size_t s) const {
    const double* row = q_.data() + s * actions_;
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions_; ++a)
        if (row[a] < row[best]) best = a;
    return best;
}

std::size_t select_action(const QTable& q, std::size_t state, double epsilon, Rng& rng) {
    if (rng.uniform() < epsilon) return rng.below(q.num_actions());
    return q.argmin(state);
}

void q_update(QTable& q, std::size_t s_prev, std::size_t action, double cost, std::size_t s_new, double beta,
              double gamma) {
    const double target = cost + gamma * q.min(s_new);
    double& entry = q(s_prev, action);
    entry = (1.0 - beta) * entry + beta * target;
}

std::size_t tabular_state_index(const SingleNodeEnv& env, const ActionSet& actions) {
    const auto& cfg = env.config();
    return (env.observed_global_index() * cfg.local.num_states() + env.observed_local_index()) * actions.size() +
           actions.index_of(env.state().action);
}

TabularQResult run_q_learning(SingleNodeEnv& env, const StepSchedule& step, const EpsilonSchedule& explore,
                              double gamma, std::uint64_t num_slots, Rng& rng) {
    const auto& cfg = env.config();
    const ActionSet actions = enumerate_actions(cfg.files, cfg.capacity);
    const std::size_t num_states = cfg.global.num_states() * cfg.local.num_states() * actions.size();

    TabularQResult out{QTable(num_states, actions.size()), {}};
    out.costs.reserve(num_slots);
    std::vector<std::uint64_t> visits;
    if (step.kind != StepSchedule::Kind::Constant) visits.assign(num_states * actions.size(), 0);

    std::size_t s_prev = tabular_state_index(env, actions);
    for (std::uint64_t t = 1; t <= num_slots; ++t) {
        const std::size_t a = select_action(out.table, s_prev, explore.at(t), rng);
        const auto result = env.step(actions[a]);
        const std::size_t s_new = tabular_state_index(env, actions);

        std::uint64_t n = 1;
        if (!visits.empty()) n = ++visits[s_prev * actions.size() + a];
        q_update(out.table, s_prev, a, result.cost, s_new, step.at(n), gamma);
        out.costs.push_back(result.cost);
        s_prev = s_new;
    }
    return out;
}

QTable q_learning_on_mdp(const ExplicitMDP& mdp, std::size_t start_state, const StepSchedule& step,
                         const EpsilonSchedule& explore, std::uint64_t num_steps, Rng& rng) {
    QTable q(mdp.num_states(), mdp.num_actions());
    std::vector<std::uint64_t> visits(mdp.num_states() * mdp.num_actions(), 0);
    std::size_t s = start_state;
    for (std::uint64_t t = 1; t <= num_steps; ++t) {
        const std::size_t a = select_action(q, s, explore.at(t), rng);
        const auto succ = mdp.successors(s, a);
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t next = succ.back().next;
        for (const auto& tr : succ) {
            cum += tr.prob;
            if (u < cum) {
                next = tr.next;
                break;
            }
        }
        const std::uint64_t n = ++visits[s * mdp.num_actions() + a];
        q_update(q, s, a, mdp.cost(s, a), next, step.at(n), mdp.gamma());
        s = next;
    }
    return q;
}

nlohmann::json qtable_to_json(const QTable& q) {
    return {{"layout", "row-major (global, local, action) x action"},
            {"num_states", q.num_states()},
            {"num_actions", q.num_actions()},
            {"q", q.data()}};
}

}  // namespace cacherl
