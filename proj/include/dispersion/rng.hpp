#pragma once

#include <bit>
#include <cstdint>

namespace dispersion {

// 64-bit finalizer from SplitMix64. Bijective, so distinct inputs give
// distinct outputs; used both for key derivation and stream output.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Combine words into a single well-mixed key.
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a + 0x9E3779B97F4A7C15ull * (b + 1));
}

// Counter-based stream generator (SplitMix64 with a keyed start state).
// A stream is fully determined by its key, so draws are reproducible
// independent of platform, thread schedule, or container iteration order.
class StreamRng {
public:
    explicit StreamRng(std::uint64_t key) noexcept : state_(mix64(key)) {}

    // Stream keyed by (trial seed, step index): one stream per process step.
    StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : state_(mix64(hash_combine(seed, stream))) {}

    std::uint64_t next_u64() noexcept {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    // Uniform in [0,1), 53 random bits.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Exact Binomial(k, 1/2): popcount of k fair random bits, consumed in
    // 64-bit blocks. Exact for every k, including the initial stack of size n.
    std::int64_t binomial_half(std::int64_t k) noexcept {
        std::int64_t ones = 0;
        while (k >= 64) {
            ones += std::popcount(next_u64());
            k -= 64;
        }
        if (k > 0) {
            const std::uint64_t mask = (~std::uint64_t{0}) >> (64 - k);
            ones += std::popcount(next_u64() & mask);
        }
        return ones;
    }

private:
    std::uint64_t state_;
};

// Per-trial seed derivation: base_seed XOR hash(n, trial_index).
constexpr std::uint64_t trial_seed(std::uint64_t base_seed, std::int64_t n,
                                   std::int64_t trial_index) noexcept {
    return base_seed ^ hash_combine(static_cast<std::uint64_t>(n),
                                    static_cast<std::uint64_t>(trial_index));
}

} // namespace dispersion
