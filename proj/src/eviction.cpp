#include "cacherl/eviction.hpp"

#include <stdexcept>

namespace cacherl {

std::string_view to_string(EvictionPolicy p) {
    switch (p) {
        case EvictionPolicy::LRU: return "lru";
        case EvictionPolicy::LFU: return "lfu";
        case EvictionPolicy::FIFO: return "fifo";
    }
    return "?";
}

EvictionCache::EvictionCache(std::size_t num_files, std::size_t capacity, EvictionPolicy policy)
    : capacity_(capacity),
      policy_(policy),
      slot_of_(num_files, -1),
      last_use_(num_files, 0),
      inserted_at_(num_files, 0),
      frequency_(num_files, 0) {
    residents_.reserve(capacity);
}

std::size_t EvictionCache::victim() const {
    std::size_t best = residents_.front();
    auto key = [&](std::size_t f) -> std::uint64_t {
        switch (policy_) {
            case EvictionPolicy::LRU: return last_use_[f];
            case EvictionPolicy::LFU: return frequency_[f];
            case EvictionPolicy::FIFO: return inserted_at_[f];
        }
        return 0;
    };
    for (std::size_t f : residents_) {
        const auto kf = key(f), kb = key(best);
        if (kf < kb || (kf == kb && f < best)) best = f;
    }
    return best;
}

bool EvictionCache::serve(std::size_t file) {
    if (file >= slot_of_.size()) throw std::invalid_argument("EvictionCache: file id out of range");
    ++clock_;
    last_evicted_.reset();
    last_use_[file] = clock_;
    ++frequency_[file];
    if (resident(file)) return true;
    if (capacity_ == 0) return false;

    if (residents_.size() == capacity_) {
        const std::size_t out = victim();
        const auto slot = static_cast<std::size_t>(slot_of_[out]);
        residents_[slot] = residents_.back();
        slot_of_[residents_[slot]] = static_cast<std::int64_t>(slot);
        residents_.pop_back();
        slot_of_[out] = -1;
        last_evicted_ = out;
    }
    slot_of_[file] = static_cast<std::int64_t>(residents_.size());
    residents_.push_back(file);
    inserted_at_[file] = clock_;
    return false;
}

}  // namespace cacherl
