#include "cacherl/two_tier.hpp"

#include <algorithm>
#include <stdexcept>

#include "cacherl/errors.hpp"

namespace cacherl {

SmoothedTopM::SmoothedTopM(std::size_t num_files, std::size_t capacity, double rho)
    : rho_(rho), h_(num_files, 0.0), action_(top_m_action(h_, capacity)) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("smoothing factor must lie in (0, 1]");
}

const ActionVector& SmoothedTopM::observe(const RequestVector& requests) {
    if (requests.size() != h_.size()) throw std::invalid_argument("SmoothedTopM: request length != F");
    for (std::size_t f = 0; f < h_.size(); ++f) h_[f] = (1.0 - rho_) * h_[f] + rho_ * static_cast<double>(requests[f]);
    action_ = top_m_action(h_, action_.capacity());
    return action_;
}

ActionVector SmoothedTopM::evaluate(std::span<const double> state) const {
    if (state.size() != h_.size()) throw std::invalid_argument("SmoothedTopM: state length != F");
    return top_m_action(state, action_.capacity());
}

RecencyTopM::RecencyTopM(std::size_t num_files, std::size_t capacity)
    : last_seen_(num_files, 0), last_count_(num_files, 0.0), action_(top_m_action(last_count_, capacity)) {}

std::vector<double> RecencyTopM::scores(std::span<const double> latest, std::uint64_t at) const {
    // Recency dominates; the count in the most recent slot seen breaks ties.
    // Counts are bounded by the slot volume, so a fixed large stride keeps the order lexicographic.
    constexpr double kStride = 1e9;
    std::vector<double> out(last_seen_.size());
    for (std::size_t f = 0; f < out.size(); ++f) {
        if (latest[f] > 0.0)
            out[f] = static_cast<double>(at) * kStride + latest[f];
        else
            out[f] = static_cast<double>(last_seen_[f]) * kStride + last_count_[f];
    }
    return out;
}

const ActionVector& RecencyTopM::observe(const RequestVector& requests) {
    if (requests.size() != last_seen_.size()) throw std::invalid_argument("RecencyTopM: request length != F");
    ++slot_;
    for (std::size_t f = 0; f < requests.size(); ++f) {
        if (requests[f] == 0) continue;
        last_seen_[f] = slot_;
        last_count_[f] = requests[f];
    }
    std::vector<double> none(requests.size(), 0.0);
    action_ = top_m_action(scores(none, slot_), action_.capacity());
    return action_;
}

ActionVector RecencyTopM::evaluate(std::span<const double> state) const {
    if (state.size() != last_seen_.size()) throw std::invalid_argument("RecencyTopM: state length != F");
    return top_m_action(scores(state, slot_ + 1), action_.capacity());
}

void NetworkConfig::validate() const {
    if (leaves == 0) throw ConfigError("network.leaves", "must be positive");
    if (files == 0) throw ConfigError("network.files", "must be positive");
    if (parent_capacity > files) throw ConfigError("network.parent_capacity", "must not exceed files");
    if (leaf_capacity > files) throw ConfigError("network.leaf_capacity", "must not exceed files");
    if (slots_per_interval == 0) throw ConfigError("network.slots_per_interval", "must be positive");
    if (!weights.empty()) {
        if (weights.size() != leaves) throw ConfigError("network.weights", "needs one weight per leaf");
        for (double w : weights)
            if (!(w >= 0.0)) throw ConfigError("network.weights", "weights must be nonnegative");
    }
    if (leaf_states == 0) throw ConfigError("network.leaf_states", "must be positive");
    if (!(eta_lo >= 0.0 && eta_lo <= eta_hi)) throw ConfigError("network.eta", "need 0 <= eta_lo <= eta_hi");
    if (!(persistence >= 0.0 && persistence <= 1.0)) throw ConfigError("network.persistence", "must lie in [0, 1]");
    if (!(smoothing > 0.0 && smoothing <= 1.0)) throw ConfigError("network.smoothing", "must lie in (0, 1]");
}

std::vector<double> NetworkConfig::effective_weights() const {
    if (!weights.empty()) return weights;
    return std::vector<double>(leaves, 1.0 / static_cast<double>(leaves));
}

std::vector<double> leaf_cost(const ActionVector& leaf_action, const RequestVector& requests,
                              const ActionVector& parent_action) {
    if (leaf_action.size() != requests.size() || parent_action.size() != requests.size())
        throw std::invalid_argument("leaf_cost: length mismatch");
    std::vector<double> c(requests.size(), 0.0);
    for (std::size_t f = 0; f < c.size(); ++f) {
        if (leaf_action.cached(f)) continue;
        const double r = requests[f];
        c[f] = (parent_action.cached(f) ? 0.0 : r) + r;
    }
    return c;
}

ParentState aggregate_state(std::span<const LeafReport> reports, std::span<const double> weights) {
    if (reports.size() != weights.size()) throw IncompleteIntervalError("aggregate_state: missing leaf report");
    if (reports.empty()) throw IncompleteIntervalError("aggregate_state: no leaves");
    ParentState s0(reports.front().unserved.size(), 0.0);
    for (std::size_t n = 0; n < reports.size(); ++n) {
        if (reports[n].unserved.size() != s0.size()) throw std::invalid_argument("aggregate_state: length mismatch");
        for (std::size_t f = 0; f < s0.size(); ++f) s0[f] += weights[n] * reports[n].unserved[f];
    }
    return s0;
}

std::vector<double> slot_avg_cost(std::span<const SlotRecord> slots, const ActionVector& parent_action,
                                  std::size_t expected_slots) {
    if (slots.size() != expected_slots || slots.empty())
        throw IncompleteIntervalError("slot_avg_cost: expected " + std::to_string(expected_slots) + " slot records, got " +
                                      std::to_string(slots.size()));
    std::vector<double> avg(parent_action.size(), 0.0);
    for (const auto& slot : slots) {
        const auto c = leaf_cost(slot.action, slot.requests, parent_action);
        for (std::size_t f = 0; f < avg.size(); ++f) avg[f] += c[f];
    }
    const double inv = 1.0 / static_cast<double>(slots.size());
    for (auto& v : avg) v *= inv;
    return avg;
}

std::vector<double> parent_cost(std::span<const std::vector<double>> leaf_costs, std::span<const double> weights) {
    if (leaf_costs.size() != weights.size()) throw IncompleteIntervalError("parent_cost: missing leaf report");
    if (leaf_costs.empty()) throw IncompleteIntervalError("parent_cost: no leaves");
    std::vector<double> c0(leaf_costs.front().size(), 0.0);
    for (std::size_t n = 0; n < leaf_costs.size(); ++n) {
        if (leaf_costs[n].size() != c0.size()) throw std::invalid_argument("parent_cost: length mismatch");
        for (std::size_t f = 0; f < c0.size(); ++f) c0[f] += weights[n] * leaf_costs[n][f];
    }
    return c0;
}

LeafReport make_report(std::span<const SlotRecord> slots, const LeafPolicy& policy) {
    if (slots.empty()) throw IncompleteIntervalError("make_report: no slots");
    LeafReport rep;
    rep.mean_state.assign(slots.front().requests.size(), 0.0);
    for (const auto& slot : slots)
        for (std::size_t f = 0; f < rep.mean_state.size(); ++f) rep.mean_state[f] += slot.requests[f];
    const double inv = 1.0 / static_cast<double>(slots.size());
    for (auto& v : rep.mean_state) v *= inv;
    rep.reported_action = policy.evaluate(rep.mean_state);
    rep.unserved = rep.mean_state;
    for (std::size_t f = 0; f < rep.unserved.size(); ++f)
        if (rep.reported_action.cached(f)) rep.unserved[f] = 0.0;
    return rep;
}

std::unique_ptr<LeafPolicy> make_leaf_policy(const NetworkConfig& config) {
    switch (config.leaf_policy) {
        case LeafPolicyKind::Smoothed: return std::make_unique<SmoothedTopM>(config.files, config.leaf_capacity, config.smoothing);
        case LeafPolicyKind::Recency: return std::make_unique<RecencyTopM>(config.files, config.leaf_capacity);
    }
    throw std::invalid_argument("unknown leaf policy");
}

PopularityChain make_leaf_chain(const NetworkConfig& config, Rng& rng) {
    auto base = random_chain(config.leaf_states, config.files, config.eta_lo, config.eta_hi, rng);
    if (config.persistence == 0.0) return base;
    const std::size_t n = base.num_states();
    std::vector<double> p = base.transition_matrix();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] *= 1.0 - config.persistence;
        p[i * n + i] += config.persistence;
    }
    return PopularityChain(base.states(), std::move(p));
}

TwoTierNetwork::TwoTierNetwork(NetworkConfig config, Rng instance, Rng dynamics)
    : config_(std::move(config)) {
    config_.validate();
    weights_ = config_.effective_weights();
    for (std::size_t n = 0; n < config_.leaves; ++n) {
        Rng chain_rng = instance.split(streams::leaves + n);
        Leaf leaf{make_leaf_chain(config_, chain_rng), 0, make_leaf_policy(config_), dynamics.split(streams::leaves + n)};
        leaf.chain_state = leaf.rng.below(leaf.chain.num_states());
        leaves_.push_back(std::move(leaf));
    }
    state_.assign(config_.files, 0.0);
}

TwoTierNetwork::TwoTierNetwork(NetworkConfig config, std::vector<PopularityChain> chains,
                               std::vector<std::unique_ptr<LeafPolicy>> policies, Rng dynamics)
    : config_(std::move(config)) {
    config_.validate();
    if (chains.size() != config_.leaves || policies.size() != config_.leaves)
        throw std::invalid_argument("TwoTierNetwork: need one chain and one policy per leaf");
    weights_ = config_.effective_weights();
    for (std::size_t n = 0; n < config_.leaves; ++n) {
        if (chains[n].num_files() != config_.files) throw std::invalid_argument("TwoTierNetwork: chain file count != F");
        Leaf leaf{std::move(chains[n]), 0, std::move(policies[n]), dynamics.split(streams::leaves + n)};
        leaf.chain_state = leaf.rng.below(leaf.chain.num_states());
        leaves_.push_back(std::move(leaf));
    }
    state_.assign(config_.files, 0.0);
}

IntervalTrace TwoTierNetwork::advance() {
    IntervalTrace trace;
    trace.slots.resize(leaves_.size());
    trace.reports.reserve(leaves_.size());
    for (std::size_t n = 0; n < leaves_.size(); ++n) {
        Leaf& leaf = leaves_[n];
        auto& slots = trace.slots[n];
        slots.reserve(config_.slots_per_interval);
        for (std::size_t t = 0; t < config_.slots_per_interval; ++t) {
            SlotRecord rec;
            rec.action = leaf.policy->current();
            rec.events = sample_request_events(leaf.chain.state(leaf.chain_state), config_.requests_per_slot, leaf.rng);
            rec.requests = count_requests(rec.events, config_.files);
            leaf.policy->observe(rec.requests);
            leaf.chain_state = step_chain(leaf.chain, leaf.chain_state, leaf.rng);
            slots.push_back(std::move(rec));
        }
        trace.reports.push_back(make_report(slots, *leaf.policy));
    }
    trace.state = aggregate_state(trace.reports, weights_);
    state_ = trace.state;
    ++interval_;
    return trace;
}

std::vector<double> TwoTierNetwork::interval_cost(const IntervalTrace& trace, const ActionVector& parent_action) const {
    if (parent_action.size() != config_.files) throw std::invalid_argument("interval_cost: parent action length != F");
    std::vector<std::vector<double>> per_leaf;
    per_leaf.reserve(trace.slots.size());
    for (const auto& slots : trace.slots)
        per_leaf.push_back(slot_avg_cost(slots, parent_action, config_.slots_per_interval));
    return parent_cost(per_leaf, weights_);
}

IntervalResult TwoTierNetwork::run_interval(const ActionVector& parent_action) {
    if (parent_action.size() != config_.files || parent_action.capacity() != config_.parent_capacity)
        throw std::invalid_argument("run_interval: parent action must cache exactly M0 of F files");
    IntervalResult out;
    out.trace = advance();
    out.cost = interval_cost(out.trace, parent_action);
    for (double c : out.cost) out.total_cost += c;
    return out;
}

EventBaseline::EventBaseline(std::size_t num_files, std::size_t capacity, EvictionPolicy policy)
    : cache_(num_files, capacity, policy) {}

double EventBaseline::serve(const IntervalTrace& trace, const TwoTierNetwork& network) {
    const auto& w = network.weights();
    const std::size_t T = network.config().slots_per_interval;
    const double inv_t = 1.0 / static_cast<double>(T);
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::size_t> cursor(trace.slots.size(), 0);
        bool pending = true;
        while (pending) {
            pending = false;
            for (std::size_t n = 0; n < trace.slots.size(); ++n) {
                const SlotRecord& slot = trace.slots[n][t];
                auto& i = cursor[n];
                while (i < slot.events.size() && slot.action.cached(slot.events[i])) ++i;
                if (i == slot.events.size()) continue;
                const bool hit = cache_.serve(slot.events[i]);
                total += w[n] * inv_t * (hit ? 1.0 : 2.0);
                ++i;
                pending = true;
            }
        }
    }
    return total;
}

ActionVector NonCausalBaseline::action_for(const IntervalTrace& trace, const TwoTierNetwork& network,
                                           std::size_t capacity) {
    const auto& w = network.weights();
    std::vector<double> demand(network.config().files, 0.0);
    for (std::size_t n = 0; n < trace.slots.size(); ++n)
        for (const auto& slot : trace.slots[n])
            for (std::size_t f = 0; f < demand.size(); ++f)
                if (!slot.action.cached(f)) demand[f] += w[n] * slot.requests[f];
    return top_m_action(demand, capacity);
}

double NonCausalBaseline::serve(const IntervalTrace& trace, const TwoTierNetwork& network) {
    const auto c = network.interval_cost(trace, action_for(trace, network, capacity_));
    double total = 0.0;
    for (double v : c) total += v;
    return total;
}

double NoCacheBaseline::serve(const IntervalTrace& trace, const TwoTierNetwork& network) {
    const ActionVector empty(std::vector<std::uint8_t>(network.config().files, 0), 0);
    const auto c = network.interval_cost(trace, empty);
    double total = 0.0;
    for (double v : c) total += v;
    return total;
}

}  // namespace cacherl
