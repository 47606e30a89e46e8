#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "cacherl/popularity.hpp"
#include "cacherl/rng.hpp"

namespace cacherl {

/// Binary caching decision over F files with exactly `capacity()` ones.
class ActionVector {
public:
    ActionVector() = default;
    /// Throws std::invalid_argument unless `bits` is 0/1 with exactly `capacity` ones.
    ActionVector(std::vector<std::uint8_t> bits, std::size_t capacity);

    static ActionVector from_indices(std::size_t num_files, std::span<const std::size_t> cached);
    static ActionVector all_ones(std::size_t num_files);

    std::size_t size() const noexcept { return bits_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool cached(std::size_t f) const { return bits_[f] != 0; }
    std::uint8_t operator[](std::size_t f) const { return bits_[f]; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::vector<std::size_t> indices() const;

    /// Number of files cached here but not in `prev` (aᵀ(1 − prev)).
    std::size_t fetched_from(const ActionVector& prev) const;

    bool operator==(const ActionVector&) const = default;

private:
    std::vector<std::uint8_t> bits_;
    std::size_t capacity_ = 0;
};

/// Ones at the M largest scores; ties go to the lower file index.
ActionVector top_m_action(std::span<const double> scores, std::size_t capacity);

/// Uniformly random M-subset of F files.
ActionVector random_action(std::size_t num_files, std::size_t capacity, Rng& rng);

/// Every M-of-F action in lexicographic order of the cached index lists,
/// so {0,1} < {0,2} < ... < {F-2,F-1}. Oracle-sized instances only (F <= 20).
class ActionSet {
public:
    static constexpr std::size_t kMaxFiles = 20;

    ActionSet(std::size_t num_files, std::size_t capacity);

    std::size_t size() const noexcept { return actions_.size(); }
    std::size_t num_files() const noexcept { return num_files_; }
    std::size_t capacity() const noexcept { return capacity_; }
    const ActionVector& operator[](std::size_t i) const { return actions_[i]; }
    const std::vector<ActionVector>& actions() const noexcept { return actions_; }
    std::size_t index_of(const ActionVector& a) const;

private:
    static std::uint32_t mask_of(const ActionVector& a);

    std::size_t num_files_;
    std::size_t capacity_;
    std::vector<ActionVector> actions_;
    std::unordered_map<std::uint32_t, std::size_t> index_;
};

/// Throws CapacityError when F exceeds ActionSet::kMaxFiles.
ActionSet enumerate_actions(std::size_t num_files, std::size_t capacity);

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Top-M over the element-wise sum of a window of future request vectors.
ActionVector noncausal_best(std::span<const RequestVector> window, std::size_t capacity);
ActionVector noncausal_best(std::span<const std::vector<double>> window, std::size_t capacity);

}  // namespace cacherl
