#pragma once

#include <cstdint>
#include <random>

namespace cacherl {

/// Seeded generator with portable draws.
///
/// std::mt19937_64 has a standardized output sequence, but the standard
/// distributions do not, so uniform reals and integers are derived here
/// directly from the raw 64-bit words. Two runs with the same seed produce
/// the same draws on every conforming toolchain.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)), seed_(seed) {}

    /// Independent child generator for a fixed component stream.
    Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t seed() const noexcept { return seed_; }

    // UniformRandomBitGenerator, for std::shuffle-free code paths that still
    // want to hand the engine to generic algorithms.
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return UINT64_MAX; }
    result_type operator()() { return engine_(); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

/// Fixed stream offsets so each component of an experiment draws from its own generator.
namespace streams {
inline constexpr std::uint64_t instance = 1;
inline constexpr std::uint64_t environment = 2;
inline constexpr std::uint64_t agent = 3;
inline constexpr std::uint64_t baselines = 4;
inline constexpr std::uint64_t leaves = 100;  // leaf n uses leaves + n
}  // namespace streams

/// In-place Fisher-Yates shuffle using the portable integer draw.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = rng.below(i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace cacherl
