#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cacherl/action.hpp"
#include "cacherl/eviction.hpp"
#include "cacherl/popularity.hpp"
#include "cacherl/rng.hpp"

namespace cacherl {

/// Weighted average unserved demand reported to the parent.
using ParentState = std::vector<double>;

/// Local caching rule of one leaf.
class LeafPolicy {
public:
    virtual ~LeafPolicy() = default;

    virtual std::size_t capacity() const = 0;
    /// Action currently held, i.e. the one used in the upcoming slot.
    virtual const ActionVector& current() const = 0;
    /// Absorbs a slot's requests and returns the action for the next slot.
    virtual const ActionVector& observe(const RequestVector& requests) = 0;
    /// The action the policy would hold after observing `state`; does not mutate.
    virtual ActionVector evaluate(std::span<const double> state) const = 0;
    virtual std::unique_ptr<LeafPolicy> clone() const = 0;
};

/// Caches the M files with the largest exponentially smoothed request counts:
/// h ← (1 − ρ) h + ρ r. evaluate(s) is the response to s held constant, top-M of s.
class SmoothedTopM final : public LeafPolicy {
public:
    SmoothedTopM(std::size_t num_files, std::size_t capacity, double rho);

    std::size_t capacity() const override { return action_.capacity(); }
    const ActionVector& current() const override { return action_; }
    const ActionVector& observe(const RequestVector& requests) override;
    ActionVector evaluate(std::span<const double> state) const override;
    std::unique_ptr<LeafPolicy> clone() const override { return std::make_unique<SmoothedTopM>(*this); }

    double rho() const noexcept { return rho_; }
    const std::vector<double>& smoothed() const noexcept { return h_; }

private:
    double rho_;
    std::vector<double> h_;
    ActionVector action_;
};

/// Caches the M most recently requested files; ties favour the larger slot count, then the lower id.
class RecencyTopM final : public LeafPolicy {
public:
    RecencyTopM(std::size_t num_files, std::size_t capacity);

    std::size_t capacity() const override { return action_.capacity(); }
    const ActionVector& current() const override { return action_; }
    const ActionVector& observe(const RequestVector& requests) override;
    ActionVector evaluate(std::span<const double> state) const override;
    std::unique_ptr<LeafPolicy> clone() const override { return std::make_unique<RecencyTopM>(*this); }

private:
    std::vector<double> scores(std::span<const double> latest, std::uint64_t at) const;

    std::uint64_t slot_ = 0;
    std::vector<std::uint64_t> last_seen_;  // slot of last request, 0 if never
    std::vector<double> last_count_;
    ActionVector action_;
};

enum class LeafPolicyKind { Smoothed, Recency };

struct NetworkConfig {
    std::size_t leaves = 10;
    std::size_t files = 100;
    std::size_t parent_capacity = 10;
    std::size_t leaf_capacity = 5;
    std::size_t slots_per_interval = 2;
    std::vector<double> weights;  // empty means 1/N each
    std::uint64_t requests_per_slot = 100;
    std::size_t leaf_states = 4;
    double eta_lo = 0.6;
    double eta_hi = 1.2;
    /// Extra self-transition mass: P = p I + (1 − p) P_random.
    double persistence = 0.0;
    LeafPolicyKind leaf_policy = LeafPolicyKind::Smoothed;
    double smoothing = 0.3;

    void validate() const;
    std::vector<double> effective_weights() const;
};

/// What one leaf saw during one slot.
struct SlotRecord {
    ActionVector action;
    RequestVector requests;
    std::vector<std::uint32_t> events;  // request order within the slot
};

/// End-of-interval message from a leaf.
struct LeafReport {
    std::vector<double> mean_state;     // s̄_n
    ActionVector reported_action;       // π_n(s̄_n)
    std::vector<double> unserved;       // s̄_n ⊙ (1 − π_n(s̄_n))
};

/// Everything the leaves did in one interval. Independent of the parent action.
struct IntervalTrace {
    std::vector<std::vector<SlotRecord>> slots;  // [leaf][slot]
    std::vector<LeafReport> reports;
    ParentState state;  // s0 at the end of the interval
};

/// r ⊙ (1 − a0) ⊙ (1 − a_n) + r ⊙ (1 − a_n).
std::vector<double> leaf_cost(const ActionVector& leaf_action, const RequestVector& requests,
                              const ActionVector& parent_action);

/// Σ_n w_n · unserved_n. Throws IncompleteIntervalError when reports and weights disagree in count.
ParentState aggregate_state(std::span<const LeafReport> reports, std::span<const double> weights);

/// Mean of leaf_cost over the interval's slots. Throws IncompleteIntervalError unless exactly `expected_slots`.
std::vector<double> slot_avg_cost(std::span<const SlotRecord> slots, const ActionVector& parent_action,
                                  std::size_t expected_slots);

/// Σ_n w_n c̄_n.
std::vector<double> parent_cost(std::span<const std::vector<double>> leaf_costs, std::span<const double> weights);

/// Builds a leaf's report from its interval slots and policy.
LeafReport make_report(std::span<const SlotRecord> slots, const LeafPolicy& policy);

struct IntervalResult {
    IntervalTrace trace;
    std::vector<double> cost;  // c0
    double total_cost = 0.0;   // 1ᵀ c0
};

class TwoTierNetwork {
public:
    /// Leaf chains come from `instance`; request draws from per-leaf streams of `dynamics`.
    TwoTierNetwork(NetworkConfig config, Rng instance, Rng dynamics);
    /// Explicit leaves, for hand-built tests.
    TwoTierNetwork(NetworkConfig config, std::vector<PopularityChain> chains, std::vector<std::unique_ptr<LeafPolicy>> policies,
                   Rng dynamics);

    const NetworkConfig& config() const noexcept { return config_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const PopularityChain& leaf_chain(std::size_t n) const { return leaves_[n].chain; }
    std::size_t leaf_chain_state(std::size_t n) const { return leaves_[n].chain_state; }
    const LeafPolicy& leaf_policy(std::size_t n) const { return *leaves_[n].policy; }
    const ParentState& state() const noexcept { return state_; }
    std::uint64_t interval() const noexcept { return interval_; }

    /// Simulates T slots at every leaf and forms the new parent state.
    IntervalTrace advance();

    /// c0 of a finished interval under `parent_action`.
    std::vector<double> interval_cost(const IntervalTrace& trace, const ActionVector& parent_action) const;

    /// advance() followed by interval_cost().
    IntervalResult run_interval(const ActionVector& parent_action);

private:
    struct Leaf {
        PopularityChain chain;
        std::size_t chain_state = 0;
        std::unique_ptr<LeafPolicy> policy;
        Rng rng;
    };

    NetworkConfig config_;
    std::vector<double> weights_;
    std::vector<Leaf> leaves_;
    ParentState state_;
    std::uint64_t interval_ = 0;
};

std::unique_ptr<LeafPolicy> make_leaf_policy(const NetworkConfig& config);

/// Per-leaf chain with a fraction of extra self-transition mass.
PopularityChain make_leaf_chain(const NetworkConfig& config, Rng& rng);

/// A parent caching rule evaluated on recorded intervals.
class ParentBaseline {
public:
    virtual ~ParentBaseline() = default;
    virtual std::string name() const = 0;
    /// 1ᵀc0 for the interval.
    virtual double serve(const IntervalTrace& trace, const TwoTierNetwork& network) = 0;
};

/// LRU, LFU or FIFO at the parent, refreshed on every request that misses the leaf.
/// Within a slot, leaf miss streams are interleaved round-robin.
class EventBaseline final : public ParentBaseline {
public:
    EventBaseline(std::size_t num_files, std::size_t capacity, EvictionPolicy policy);
    std::string name() const override { return std::string(to_string(cache_.policy())); }
    double serve(const IntervalTrace& trace, const TwoTierNetwork& network) override;

private:
    EvictionCache cache_;
};

/// Caches the interval's most requested unserved files, knowing them in advance.
class NonCausalBaseline final : public ParentBaseline {
public:
    explicit NonCausalBaseline(std::size_t capacity) : capacity_(capacity) {}
    std::string name() const override { return "optimal"; }
    double serve(const IntervalTrace& trace, const TwoTierNetwork& network) override;
    static ActionVector action_for(const IntervalTrace& trace, const TwoTierNetwork& network, std::size_t capacity);

private:
    std::size_t capacity_;
};

/// Empty parent cache.
class NoCacheBaseline final : public ParentBaseline {
public:
    std::string name() const override { return "nocache"; }
    double serve(const IntervalTrace& trace, const TwoTierNetwork& network) override;
};

}  // namespace cacherl
