#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace cacherl {

enum class EvictionPolicy { LRU, LFU, FIFO };

std::string_view to_string(EvictionPolicy p);

/// Event-driven cache used by the classical baselines.
///
/// Every access updates metadata; a miss inserts the file, evicting one
/// resident when full. LFU keeps frequency counts for every file ever seen,
/// not only residents. Ties evict the lowest file id.
class EvictionCache {
public:
    EvictionCache(std::size_t num_files, std::size_t capacity, EvictionPolicy policy);

    /// Returns true on a hit.
    bool serve(std::size_t file);

    bool resident(std::size_t file) const { return slot_of_[file] >= 0; }
    std::size_t size() const noexcept { return residents_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    EvictionPolicy policy() const noexcept { return policy_; }
    const std::vector<std::size_t>& residents() const noexcept { return residents_; }
    /// File evicted by the most recent serve(), if any.
    std::optional<std::size_t> last_evicted() const noexcept { return last_evicted_; }
    std::uint64_t frequency(std::size_t file) const { return frequency_[file]; }

private:
    std::size_t victim() const;

    std::size_t capacity_;
    EvictionPolicy policy_;
    std::uint64_t clock_ = 0;
    std::vector<std::size_t> residents_;
    std::vector<std::int64_t> slot_of_;        // index into residents_, -1 if absent
    std::vector<std::uint64_t> last_use_;      // LRU
    std::vector<std::uint64_t> inserted_at_;   // FIFO
    std::vector<std::uint64_t> frequency_;     // LFU, global
    std::optional<std::size_t> last_evicted_;
};

/// Functional form: serve `request` and report whether it hit.
inline bool baseline_serve(EvictionCache& cache, std::size_t request) { return cache.serve(request); }

}  // namespace cacherl
