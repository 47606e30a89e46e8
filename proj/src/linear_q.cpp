#include "cacherl/linear_q.hpp"

#include <cmath>
#include <stdexcept>

#include "cacherl/errors.hpp"

namespace cacherl {

LinearQParams::LinearQParams(std::size_t global_states, std::size_t local_states, std::size_t files)
    : files_(files),
      global_states_(global_states),
      local_states_(local_states),
      theta_g_(global_states * files, 0.0),
      theta_l_(local_states * files, 0.0) {}

namespace {

void check_state(const SystemState& s, const LinearQParams& params) {
    if (s.global_idx >= params.global_states() || s.local_idx >= params.local_states())
        throw std::invalid_argument("linear-q: profile index out of range");
    if (s.action.size() != params.files()) throw std::invalid_argument("linear-q: action length != F");
}

SystemState observed_state(const SingleNodeEnv& env) {
    return SystemState{env.observed_global_index(), env.observed_local_index(), env.state().action};
}

}  // namespace

std::vector<double> psi(const SystemState& state, const LinearQParams& params) {
    check_state(state, params);
    const auto g = params.global_row(state.global_idx);
    const auto l = params.local_row(state.local_idx);
    std::vector<double> out(params.files());
    for (std::size_t f = 0; f < out.size(); ++f)
        out[f] = g[f] + l[f] + params.refresh() * static_cast<double>(state.action[f]);
    return out;
}

double approx_q(const SystemState& state, const ActionVector& a_next, const LinearQParams& params) {
    if (a_next.size() != params.files()) throw std::invalid_argument("approx_q: action length != F");
    const auto p = psi(state, params);
    double q = 0.0;
    for (std::size_t f = 0; f < p.size(); ++f)
        if (!a_next.cached(f)) q += p[f];
    return q;
}

ActionVector greedy_action(const SystemState& state, const LinearQParams& params, std::size_t capacity) {
    return top_m_action(psi(state, params), capacity);
}

double td_error(const SystemState& s_prev, const ActionVector& a_taken, double cost, const SystemState& s_new,
                const LinearQParams& params, double gamma, std::size_t capacity) {
    const double bootstrap = approx_q(s_new, greedy_action(s_new, params, capacity), params);
    return cost + gamma * bootstrap - approx_q(s_prev, a_taken, params);
}

void sgd_update(LinearQParams& params, const SystemState& s_prev, const ActionVector& a_taken, double td,
                const StepSizes& steps) {
    if (!std::isfinite(td)) throw NumericalError("sgd_update: non-finite temporal-difference error");
    check_state(s_prev, params);
    if (a_taken.size() != params.files()) throw std::invalid_argument("sgd_update: action length != F");
    auto g = params.global_row(s_prev.global_idx);
    auto l = params.local_row(s_prev.local_idx);
    const double dg = steps.global * td, dl = steps.local * td;
    double kept_uncached = 0.0;  // a_prevᵀ(1 − a_taken)
    for (std::size_t f = 0; f < params.files(); ++f) {
        if (a_taken.cached(f)) continue;
        g[f] += dg;
        l[f] += dl;
        kept_uncached += static_cast<double>(s_prev.action[f]);
    }
    params.refresh() += steps.refresh * td * kept_uncached;
}

LinearQResult run_linear_q(SingleNodeEnv& env, const StepSizes& steps, const EpsilonSchedule& explore, double gamma,
                           std::uint64_t num_slots, Rng& rng) {
    const auto& cfg = env.config();
    LinearQResult out{LinearQParams(cfg.global.num_states(), cfg.local.num_states(), cfg.files), {}};
    out.costs.reserve(num_slots);

    SystemState s_prev = observed_state(env);
    for (std::uint64_t t = 1; t <= num_slots; ++t) {
        ActionVector a = rng.uniform() < explore.at(t) ? random_action(cfg.files, cfg.capacity, rng)
                                                       : greedy_action(s_prev, out.params, cfg.capacity);
        const auto result = env.step(a);
        SystemState s_new = observed_state(env);
        const double e = td_error(s_prev, a, result.cost, s_new, out.params, gamma, cfg.capacity);
        sgd_update(out.params, s_prev, a, e, steps);
        out.costs.push_back(result.cost);
        s_prev = std::move(s_new);
    }
    return out;
}

nlohmann::json linear_params_to_json(const LinearQParams& params) {
    return {{"files", params.files()},
            {"global_states", params.global_states()},
            {"local_states", params.local_states()},
            {"theta_global", params.theta_global()},
            {"theta_local", params.theta_local()},
            {"theta_refresh", params.refresh()}};
}

}  // namespace cacherl
