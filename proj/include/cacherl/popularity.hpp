#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cacherl/rng.hpp"

namespace cacherl {

/// Per-slot request counts, one entry per file.
using RequestVector = std::vector<std::uint32_t>;

/// Probability mass function over F files.
///
/// Construction validates nonnegativity and unit mass (within 1e-12, summed
/// in extended precision).
class ProbVector {
public:
    ProbVector() = default;
    explicit ProbVector(std::vector<double> entries);

    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t f) const { return p_[f]; }
    std::span<const double> values() const noexcept { return p_; }
    const std::vector<double>& vec() const noexcept { return p_; }

    bool operator==(const ProbVector&) const = default;

private:
    std::vector<double> p_;
};

/// Finite-state Markov chain whose states are popularity profiles.
class PopularityChain {
public:
    PopularityChain() = default;
    /// `transition` is row-major |states| x |states|; rows must be stochastic.
    PopularityChain(std::vector<ProbVector> states, std::vector<double> transition);

    std::size_t num_states() const noexcept { return states_.size(); }
    std::size_t num_files() const noexcept { return states_.empty() ? 0 : states_.front().size(); }
    const ProbVector& state(std::size_t i) const { return states_.at(i); }
    const std::vector<ProbVector>& states() const noexcept { return states_; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(transition_).subspan(i * num_states(), num_states());
    }
    double transition(std::size_t from, std::size_t to) const { return transition_[from * num_states() + to]; }
    const std::vector<double>& transition_matrix() const noexcept { return transition_; }

    /// Stationary distribution by power iteration (test and diagnostics helper).
    std::vector<double> stationary(int max_iter = 100000, double tol = 1e-14) const;

    bool operator==(const PopularityChain&) const = default;

private:
    std::vector<ProbVector> states_;
    std::vector<double> transition_;
};

/// Zipf profile: the file at rank r (1-based, rank r held by ordering[r-1])
/// gets mass r^-eta / sum_l l^-eta. Files are 0-based ids.
ProbVector zipf_profile(std::size_t num_files, double eta, std::span<const std::size_t> ordering);
ProbVector zipf_profile(std::size_t num_files, double eta);  // identity ordering

/// Chain whose states are Zipf profiles with the given exponents, each with an
/// independent random rank permutation; transition entries i.i.d. uniform(0,1)
/// then row-normalized.
PopularityChain chain_from_etas(std::span<const double> etas, std::size_t num_files, Rng& rng);

/// As chain_from_etas with each exponent drawn uniformly from [eta_lo, eta_hi].
PopularityChain random_chain(std::size_t num_states, std::size_t num_files, double eta_lo, double eta_hi,
                             Rng& rng);

std::size_t step_chain(const PopularityChain& chain, std::size_t state_idx, Rng& rng);

/// `requests` independent categorical draws from `profile`, in draw order.
std::vector<std::uint32_t> sample_request_events(const ProbVector& profile, std::uint64_t requests, Rng& rng);

RequestVector count_requests(std::span<const std::uint32_t> events, std::size_t num_files);

/// Counts of sample_request_events with the same draws.
RequestVector sample_requests(const ProbVector& profile, std::uint64_t requests, Rng& rng);

/// counts / total. Throws NoRequestsError when every count is zero.
ProbVector empirical_profile(const RequestVector& requests);

/// Index of the state nearest to `profile` in total-variation distance.
std::size_t nearest_state(const PopularityChain& chain, const ProbVector& profile);

double total_variation(std::span<const double> a, std::span<const double> b);

// {"states": [[...]], "transition": [[...]]}
nlohmann::json chain_to_json(const PopularityChain& chain);
PopularityChain chain_from_json(const nlohmann::json& doc);

}  // namespace cacherl
