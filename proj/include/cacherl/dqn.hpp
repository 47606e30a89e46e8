#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "cacherl/action.hpp"
#include "cacherl/neuralnet.hpp"
#include "cacherl/rng.hpp"
#include "cacherl/two_tier.hpp"

namespace cacherl {

struct Experience {
    ParentState s_prev;
    ActionVector action;
    std::vector<double> cost;
    ParentState s_new;
};

/// Bounded FIFO of experiences; capacity 0 means unbounded.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

    void push(Experience e);
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const Experience& at(std::size_t i) const { return items_.at(i); }
    /// Uniform index in [0, size()).
    std::size_t sample_index(Rng& rng) const { return static_cast<std::size_t>(rng.below(items_.size())); }

private:
    std::size_t capacity_;
    std::deque<Experience> items_;
};

struct DqnConfig {
    std::vector<std::size_t> partition;  // group sizes F_k, in file order
    std::size_t hidden_factor = 2;       // hidden width = hidden_factor · F_k
    std::size_t hidden_layers = 1;
    OutputHead head = OutputHead::Linear;
    double gamma = 0.9;
    std::size_t sync_period = 50;

    void validate(std::size_t num_files) const;
};

/// Contiguous split of s0 by group sizes. Throws InvalidPartitionError unless Σ F_k = |s0|.
std::vector<std::vector<double>> partition_state(std::span<const double> s0, std::span<const std::size_t> partition);

/// K equal groups; the remainder goes to the leading groups.
std::vector<std::size_t> even_partition(std::size_t num_files, std::size_t groups);

/// K online nets and K target nets, one pair per file group.
class HyperDQN {
public:
    HyperDQN(DqnConfig config, Rng& init);
    /// From explicit online nets; targets start as copies.
    HyperDQN(DqnConfig config, std::vector<FeedforwardNet> online);

    const DqnConfig& config() const noexcept { return config_; }
    std::size_t num_groups() const noexcept { return online_.size(); }
    std::size_t num_files() const noexcept { return files_; }
    std::size_t group_offset(std::size_t k) const { return offsets_[k]; }
    FeedforwardNet& online(std::size_t k) { return online_[k]; }
    const FeedforwardNet& online(std::size_t k) const { return online_[k]; }
    const FeedforwardNet& target(std::size_t k) const { return target_[k]; }
    std::uint64_t training_steps() const noexcept { return steps_; }
    std::uint64_t syncs() const noexcept { return syncs_; }

    /// Concatenated online outputs o.
    std::vector<double> predict_costs(std::span<const double> s0) const;
    /// Concatenated target outputs.
    std::vector<double> predict_target(std::span<const double> s0) const;

    /// [c + γ Q_tar(s_new) − Q(s_prev)] ⊙ (1 − a).
    std::vector<double> target_error(const Experience& e) const;

    /// One SGD step per group on the batch-mean masked loss over min(B, size)
    /// uniformly drawn experiences. Returns false, changing nothing, on an empty buffer.
    bool train_batch(const ReplayBuffer& buffer, std::size_t batch, double lr, Rng& rng);

    /// Copies online into target when training_steps() is a multiple of C.
    bool maybe_sync_target();

    /// Mean masked loss of the last train_batch, summed over groups.
    double last_loss() const noexcept { return last_loss_; }

    /// Writes group_<k>.net per group plus manifest.json into `dir`.
    void save(const std::filesystem::path& dir) const;
    /// Restores online nets and counters; targets are set equal to the online nets.
    static HyperDQN load(const std::filesystem::path& dir);

private:
    std::vector<double> group_target(std::size_t k, const Experience& e) const;
    void init_offsets();

    DqnConfig config_;
    std::size_t files_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<FeedforwardNet> online_;
    std::vector<FeedforwardNet> target_;
    std::uint64_t steps_ = 0;
    std::uint64_t syncs_ = 0;
    double last_loss_ = 0.0;
};

/// ε-greedy parent action: top-M0 of predict_costs w.p. 1 − ε, else a uniform M0-subset.
ActionVector select_action(const HyperDQN& dqn, std::span<const double> s0, std::size_t capacity, double epsilon,
                           Rng& rng);

}  // namespace cacherl
