#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "cacherl/action.hpp"
#include "cacherl/rng.hpp"
#include "cacherl/schedule.hpp"
#include "cacherl/single_node.hpp"

namespace cacherl {

/// Parameters of the additive Q approximation
///
///   Q(s, a') ≈ ψ(s)ᵀ(1 − a'),   ψ(s) = Θ_G[g] + Θ_L[l] + θ_R · a,
///
/// where g and l are the profile-state indices in s and a is the cached
/// action in s. Θ_G holds one length-F row per global profile state and Θ_L
/// one per local profile state; θ_R is a single scalar shared by all files.
class LinearQParams {
public:
    LinearQParams() = default;
    LinearQParams(std::size_t global_states, std::size_t local_states, std::size_t files);

    std::size_t files() const noexcept { return files_; }
    std::size_t global_states() const noexcept { return global_states_; }
    std::size_t local_states() const noexcept { return local_states_; }

    std::span<double> global_row(std::size_t g) { return std::span<double>(theta_g_).subspan(g * files_, files_); }
    std::span<const double> global_row(std::size_t g) const {
        return std::span<const double>(theta_g_).subspan(g * files_, files_);
    }
    std::span<double> local_row(std::size_t l) { return std::span<double>(theta_l_).subspan(l * files_, files_); }
    std::span<const double> local_row(std::size_t l) const {
        return std::span<const double>(theta_l_).subspan(l * files_, files_);
    }
    double& refresh() noexcept { return theta_r_; }
    double refresh() const noexcept { return theta_r_; }

    const std::vector<double>& theta_global() const noexcept { return theta_g_; }
    const std::vector<double>& theta_local() const noexcept { return theta_l_; }

    /// Number of learnable scalars: (|P_G| + |P_L|) · F + 1.
    std::size_t parameter_count() const noexcept { return theta_g_.size() + theta_l_.size() + 1; }

    bool operator==(const LinearQParams&) const = default;

private:
    std::size_t files_ = 0;
    std::size_t global_states_ = 0;
    std::size_t local_states_ = 0;
    std::vector<double> theta_g_;
    std::vector<double> theta_l_;
    double theta_r_ = 0.0;
};

struct StepSizes {
    double global = 0.005;
    double local = 0.005;
    double refresh = 0.005;
};

std::vector<double> psi(const SystemState& state, const LinearQParams& params);

/// ψ(s)ᵀ(1 − a_next).
double approx_q(const SystemState& state, const ActionVector& a_next, const LinearQParams& params);

/// Minimizer of approx_q over all M-subsets: cache the M largest ψ entries.
ActionVector greedy_action(const SystemState& state, const LinearQParams& params, std::size_t capacity);

/// cost + γ min_a' Q(s_new, a') − Q(s_prev, a_taken), with current parameters on both sides.
double td_error(const SystemState& s_prev, const ActionVector& a_taken, double cost, const SystemState& s_new,
                const LinearQParams& params, double gamma, std::size_t capacity);

/// One stochastic gradient step on ½ê² along the semi-gradient of Q(s_prev, a_taken).
/// Only the uncached coordinates of the visited Θ rows, and θ_R, move.
void sgd_update(LinearQParams& params, const SystemState& s_prev, const ActionVector& a_taken, double td,
                const StepSizes& steps);

struct LinearQResult {
    LinearQParams params;
    std::vector<double> costs;
};

LinearQResult run_linear_q(SingleNodeEnv& env, const StepSizes& steps, const EpsilonSchedule& explore, double gamma,
                           std::uint64_t num_slots, Rng& rng);

nlohmann::json linear_params_to_json(const LinearQParams& params);

}  // namespace cacherl
