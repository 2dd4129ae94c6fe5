#pragma once

#include <cmath>
#include <cstdint>

namespace neq {

// SplitMix64 finalizer. Bijective on u64.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_key(mix_key(a, b), c);
}

// Counter-based generator: output n is a hash of (key, n), so substreams keyed
// by (seed, stream-id) can be generated independently and out of order.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix_key(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased for any n >= 1 (Lemire); exact partition when n is a power of two.
    std::uint32_t uniform_below(std::uint32_t n) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 64);
    }

    // Standard normal via Box-Muller; always consumes exactly two draws.
    double gaussian() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace neq
