// Deterministic counter-based randomness for reproducible campaigns.
//
// All randomness in the simulators flows through CounterRng, a splitmix64
// stream: the n-th draw is finalize(seed + n * kGolden) with the constants
// below. No platform RNG is used anywhere, so a (seed, draw-index) pair
// yields the same value on every platform and in any process.

#pragma once

#include <cstdint>

namespace emfi {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer (Steele/Lea/Flood constants). Bijective on u64.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

    constexpr std::uint64_t next_u64() {
        ++counter_;
        return mix64(seed_ + counter_ * kGolden);
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). Modulo bias is irrelevant here (n is tiny and only
    // determinism matters), so keep the mapping trivially portable.
    constexpr std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

    bool bernoulli(double p) { return next_double() < p; }

    constexpr std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Stateless per-trial seed derivation: three chained mix64 rounds absorb the
// coordinate, parameter and trial indices. Documented so external tooling
// can reproduce any trial from the campaign seed alone.
constexpr std::uint64_t derive_trial_seed(std::uint64_t campaign_seed,
                                          std::uint64_t coordinate_index,
                                          std::uint64_t param_index,
                                          std::uint64_t trial_index) {
    std::uint64_t h = mix64(campaign_seed + coordinate_index);
    h = mix64(h + param_index);
    h = mix64(h + trial_index);
    return h;
}

}  // namespace emfi
