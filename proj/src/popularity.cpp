#include "cacherl/popularity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cacherl/errors.hpp"

namespace cacherl {

namespace {

constexpr double kMassTol = 1e-12;

long double extended_sum(std::span<const double> v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    return s;
}

void check_distribution(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
    }
    const long double s = extended_sum(v);
    if (std::fabs(static_cast<double>(s - 1.0L)) > kMassTol) {
        throw std::invalid_argument(std::string(what) + ": entries do not sum to 1");
    }
}

}  // namespace

ProbVector::ProbVector(std::vector<double> entries) : p_(std::move(entries)) {
    if (p_.empty()) throw std::invalid_argument("ProbVector: empty");
    check_distribution(p_, "ProbVector");
}

PopularityChain::PopularityChain(std::vector<ProbVector> states, std::vector<double> transition)
    : states_(std::move(states)), transition_(std::move(transition)) {
    const std::size_t n = states_.size();
    if (n == 0) throw std::invalid_argument("PopularityChain: no states");
    if (transition_.size() != n * n) throw std::invalid_argument("PopularityChain: transition must be |states| x |states|");
    for (const auto& s : states_) {
        if (s.size() != states_.front().size()) throw std::invalid_argument("PopularityChain: states differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) check_distribution(row(i), "PopularityChain transition row");
}

std::vector<double> PopularityChain::stationary(int max_iter, double tol) const {
    const std::size_t n = num_states();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < max_iter; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * transition(i, j);
        double diff = 0.0;
        for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::fabs(next[j] - pi[j]));
        // Lazy averaging handles periodic chains.
        for (std::size_t j = 0; j < n; ++j) pi[j] = 0.5 * (pi[j] + next[j]);
        if (diff < tol) break;
    }
    return pi;
}

ProbVector zipf_profile(std::size_t num_files, double eta, std::span<const std::size_t> ordering) {
    if (num_files == 0) throw std::invalid_argument("zipf_profile: F must be >= 1");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("zipf_profile: eta must be >= 0");
    if (ordering.size() != num_files) throw std::invalid_argument("zipf_profile: ordering length != F");
    std::vector<char> seen(num_files, 0);
    for (std::size_t f : ordering) {
        if (f >= num_files || seen[f]) throw std::invalid_argument("zipf_profile: ordering is not a permutation");
        seen[f] = 1;
    }

    std::vector<long double> weight(num_files);
    long double norm = 0.0L;
    for (std::size_t r = 0; r < num_files; ++r) {
        weight[r] = std::pow(static_cast<long double>(r + 1), -static_cast<long double>(eta));
        norm += weight[r];
    }
    std::vector<double> p(num_files);
    for (std::size_t r = 0; r < num_files; ++r) p[ordering[r]] = static_cast<double>(weight[r] / norm);
    return ProbVector(std::move(p));
}

ProbVector zipf_profile(std::size_t num_files, double eta) {
    std::vector<std::size_t> identity(num_files);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    return zipf_profile(num_files, eta, identity);
}

PopularityChain chain_from_etas(std::span<const double> etas, std::size_t num_files, Rng& rng) {
    if (etas.empty()) throw std::invalid_argument("chain_from_etas: need at least one state");
    const std::size_t n = etas.size();
    std::vector<ProbVector> states;
    states.reserve(n);
    std::vector<std::size_t> order(num_files);
    for (double eta : etas) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order.begin(), order.end(), rng);
        states.push_back(zipf_profile(num_files, eta, order));
    }

    std::vector<double> transition(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = transition.data() + i * n;
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            // Open interval keeps every transition reachable.
            double u;
            do {
                u = rng.uniform();
            } while (u == 0.0);
            row[j] = u;
            total += u;
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= total;
    }
    return PopularityChain(std::move(states), std::move(transition));
}

PopularityChain random_chain(std::size_t num_states, std::size_t num_files, double eta_lo, double eta_hi, Rng& rng) {
    if (num_states == 0) throw std::invalid_argument("random_chain: num_states must be >= 1");
    if (!(eta_lo <= eta_hi) || eta_lo < 0.0) throw std::invalid_argument("random_chain: empty or negative eta interval");
    std::vector<double> etas(num_states);
    for (auto& e : etas) e = rng.uniform(eta_lo, eta_hi);
    return chain_from_etas(etas, num_files, rng);
}

std::size_t step_chain(const PopularityChain& chain, std::size_t state_idx, Rng& rng) {
    if (state_idx >= chain.num_states()) throw std::invalid_argument("step_chain: state index out of range");
    const auto row = chain.row(state_idx);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) last_positive = j;
        cum += row[j];
        if (u < cum) return j;
    }
    // Rounding left u above the cumulative total.
    return last_positive;
}

std::vector<std::uint32_t> sample_request_events(const ProbVector& profile, std::uint64_t requests, Rng& rng) {
    const std::size_t n = profile.size();
    std::vector<std::uint32_t> events;
    if (requests == 0) return events;
    events.reserve(requests);
    std::vector<double> cdf(n);
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t f = 0; f < n; ++f) {
        cum += profile[f];
        cdf[f] = cum;
        if (profile[f] > 0.0) last_positive = f;
    }
    for (std::uint64_t k = 0; k < requests; ++k) {
        const double u = rng.uniform() * cum;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t f = it == cdf.end() ? last_positive : static_cast<std::size_t>(it - cdf.begin());
        events.push_back(static_cast<std::uint32_t>(f));
    }
    return events;
}

RequestVector count_requests(std::span<const std::uint32_t> events, std::size_t num_files) {
    RequestVector counts(num_files, 0);
    for (auto f : events) ++counts.at(f);
    return counts;
}

RequestVector sample_requests(const ProbVector& profile, std::uint64_t requests, Rng& rng) {
    return count_requests(sample_request_events(profile, requests, rng), profile.size());
}

ProbVector empirical_profile(const RequestVector& requests) {
    std::uint64_t total = 0;
    for (auto c : requests) total += c;
    if (total == 0) throw NoRequestsError("empirical_profile: no requests in slot");
    std::vector<double> p(requests.size());
    for (std::size_t f = 0; f < requests.size(); ++f)
        p[f] = static_cast<double>(requests[f]) / static_cast<double>(total);
    return ProbVector(std::move(p));
}

double total_variation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("total_variation: length mismatch");
    double s = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) s += std::fabs(a[f] - b[f]);
    return 0.5 * s;
}

std::size_t nearest_state(const PopularityChain& chain, const ProbVector& profile) {
    std::size_t best = 0;
    double best_d = total_variation(chain.state(0).values(), profile.values());
    for (std::size_t i = 1; i < chain.num_states(); ++i) {
        const double d = total_variation(chain.state(i).values(), profile.values());
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

nlohmann::json chain_to_json(const PopularityChain& chain) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : chain.states()) states.push_back(s.vec());
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < chain.num_states(); ++i) {
        auto r = chain.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"states", std::move(states)}, {"transition", std::move(rows)}};
}

PopularityChain chain_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("states") || !doc.contains("transition"))
        throw std::invalid_argument("chain JSON: expected {\"states\": ..., \"transition\": ...}");
    std::vector<ProbVector> states;
    for (const auto& s : doc.at("states")) states.emplace_back(s.get<std::vector<double>>());
    std::vector<double> flat;
    const auto& rows = doc.at("transition");
    for (const auto& r : rows) {
        auto v = r.get<std::vector<double>>();
        if (v.size() != rows.size()) throw std::invalid_argument("chain JSON: transition is not square");
        flat.insert(flat.end(), v.begin(), v.end());
    }
    return PopularityChain(std::move(states), std::move(flat));
}

}  // namespace cacherl
