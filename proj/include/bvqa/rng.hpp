#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bvqa {

/// Seeded random stream. All randomness in the library flows through one of
/// these; every experiment derives named sub-streams from a single root seed
/// so that reruns with the same seed are byte-identical.
///
/// Draws avoid std::*_distribution on purpose: their outputs are not pinned
/// by the standard, and reports must reproduce exactly across toolchains.
class Rng {
  public:
    Rng() : engine_(0x9e3779b97f4a7c15ull) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Raw 64 uniform bits.
    uint64_t bits() { return engine_(); }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Requires n >= 1.
    uint64_t below(uint64_t n) {
        // Rejection sampling; bias-free and portable.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = bits();
        while (v >= limit) {
            v = bits();
        }
        return v % n;
    }

    /// Fair coin.
    int bit() { return static_cast<int>(bits() >> 63); }

    /// Bernoulli(p) draw.
    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Fisher-Yates shuffle of [first, last).
    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
    }
    return h;
}
}  // namespace detail

/// Deterministically derives the seed of sub-stream (tag, index) from a root
/// seed. Distinct tags and indices give statistically independent streams.
[[nodiscard]] inline uint64_t substream_seed(uint64_t root, std::string_view tag,
                                             uint64_t index = 0) {
    uint64_t h = detail::splitmix64(root ^ detail::fnv1a(tag));
    return detail::splitmix64(h ^ detail::splitmix64(index));
}

/// Convenience: sub-stream Rng for (tag, index) under a root seed.
[[nodiscard]] inline Rng substream(uint64_t root, std::string_view tag, uint64_t index = 0) {
    return Rng(substream_seed(root, tag, index));
}

}  // namespace bvqa
