#include "cacherl/action.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cacherl/errors.hpp"

namespace cacherl {

ActionVector::ActionVector(std::vector<std::uint8_t> bits, std::size_t capacity)
    : bits_(std::move(bits)), capacity_(capacity) {
    std::size_t ones = 0;
    for (auto b : bits_) {
        if (b > 1) throw std::invalid_argument("ActionVector: entries must be 0 or 1");
        ones += b;
    }
    if (ones != capacity_) throw std::invalid_argument("ActionVector: number of cached files != capacity");
}

ActionVector ActionVector::from_indices(std::size_t num_files, std::span<const std::size_t> cached) {
    std::vector<std::uint8_t> bits(num_files, 0);
    for (auto f : cached) {
        if (f >= num_files) throw std::invalid_argument("ActionVector: file index out of range");
        if (bits[f]) throw std::invalid_argument("ActionVector: duplicate file index");
        bits[f] = 1;
    }
    return ActionVector(std::move(bits), cached.size());
}

ActionVector ActionVector::all_ones(std::size_t num_files) {
    return ActionVector(std::vector<std::uint8_t>(num_files, 1), num_files);
}

std::vector<std::size_t> ActionVector::indices() const {
    std::vector<std::size_t> out;
    out.reserve(capacity_);
    for (std::size_t f = 0; f < bits_.size(); ++f)
        if (bits_[f]) out.push_back(f);
    return out;
}

std::size_t ActionVector::fetched_from(const ActionVector& prev) const {
    if (prev.size() != size()) throw std::invalid_argument("ActionVector: length mismatch");
    std::size_t n = 0;
    for (std::size_t f = 0; f < bits_.size(); ++f) n += bits_[f] & (1 - prev.bits_[f]);
    return n;
}

ActionVector top_m_action(std::span<const double> scores, std::size_t capacity) {
    const std::size_t n = scores.size();
    if (capacity > n) throw std::invalid_argument("top_m_action: M > F");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(capacity), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    std::vector<std::uint8_t> bits(n, 0);
    for (std::size_t k = 0; k < capacity; ++k) bits[order[k]] = 1;
    return ActionVector(std::move(bits), capacity);
}

ActionVector random_action(std::size_t num_files, std::size_t capacity, Rng& rng) {
    if (capacity > num_files) throw std::invalid_argument("random_action: M > F");
    std::vector<std::size_t> idx(num_files);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first M slots end up a uniform M-subset.
    for (std::size_t k = 0; k < capacity; ++k) {
        const auto j = k + rng.below(num_files - k);
        std::swap(idx[k], idx[j]);
    }
    return ActionVector::from_indices(num_files, std::span<const std::size_t>(idx.data(), capacity));
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    // r stays an exact binomial after each step; check the product before forming it.
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t m = n - k + i;
        const std::uint64_t g = std::gcd(r, i);
        const std::uint64_t r1 = r / g, d = i / g;
        const std::uint64_t m1 = m / d;  // d divides m once r/g shares no factor with d
        if (m1 != 0 && r1 > UINT64_MAX / m1) return UINT64_MAX;
        r = r1 * m1;
    }
    return r;
}

ActionSet::ActionSet(std::size_t num_files, std::size_t capacity) : num_files_(num_files), capacity_(capacity) {
    if (num_files > kMaxFiles) throw CapacityError("enumerate_actions: F exceeds " + std::to_string(kMaxFiles));
    if (capacity > num_files) throw std::invalid_argument("enumerate_actions: M > F");
    actions_.reserve(binomial(num_files, capacity));
    std::vector<std::size_t> comb(capacity);
    std::iota(comb.begin(), comb.end(), std::size_t{0});
    while (true) {
        actions_.push_back(ActionVector::from_indices(num_files, comb));
        // Advance to the next combination in lexicographic order.
        std::size_t i = capacity;
        while (i > 0 && comb[i - 1] == num_files - capacity + (i - 1)) --i;
        if (i == 0) break;
        ++comb[i - 1];
        for (std::size_t j = i; j < capacity; ++j) comb[j] = comb[j - 1] + 1;
    }
    for (std::size_t i = 0; i < actions_.size(); ++i) index_.emplace(mask_of(actions_[i]), i);
}

std::uint32_t ActionSet::mask_of(const ActionVector& a) {
    std::uint32_t m = 0;
    for (std::size_t f = 0; f < a.size(); ++f)
        if (a.cached(f)) m |= 1u << f;
    return m;
}

std::size_t ActionSet::index_of(const ActionVector& a) const {
    if (a.size() != num_files_ || a.capacity() != capacity_) throw std::invalid_argument("ActionSet: action shape mismatch");
    return index_.at(mask_of(a));
}

ActionSet enumerate_actions(std::size_t num_files, std::size_t capacity) { return ActionSet(num_files, capacity); }

namespace {

template <typename Vec>
ActionVector noncausal_impl(std::span<const Vec> window, std::size_t capacity) {
    if (window.empty()) throw std::invalid_argument("noncausal_best: empty window");
    const std::size_t n = window.front().size();
    std::vector<double> total(n, 0.0);
    for (const auto& v : window) {
        if (v.size() != n) throw std::invalid_argument("noncausal_best: length mismatch");
        for (std::size_t f = 0; f < n; ++f) total[f] += static_cast<double>(v[f]);
    }
    return top_m_action(total, capacity);
}

}  // namespace

ActionVector noncausal_best(std::span<const RequestVector> window, std::size_t capacity) {
    return noncausal_impl(window, capacity);
}

ActionVector noncausal_best(std::span<const std::vector<double>> window, std::size_t capacity) {
    return noncausal_impl(window, capacity);
}

}  // namespace cacherl
