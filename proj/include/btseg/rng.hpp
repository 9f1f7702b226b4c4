// rng.hpp
// Seeded random source and portable draw helpers. std:: distributions are
// implementation-defined, so every draw used by the pipeline goes through
// these functions to keep artifacts bit-reproducible across toolchains.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace btseg {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent per-stage/per-item seeds.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    return mix_seed(base ^ mix_seed(stream));
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return derive_seed(base, h);
}

// Uniform in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline uint64_t bounded_u64(Rng& rng, uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller (no cached state).
inline double normal01(Rng& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

template <typename T>
void normal_fill(Rng& rng, T* dst, size_t n, double mean, double stddev) {
    for (size_t i = 0; i < n; ++i)
        dst[i] = static_cast<T>(mean + stddev * normal01(rng));
}

// Fisher-Yates with our own bounded draw (std::shuffle is not portable).
template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
        const uint64_t j = bounded_u64(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

}  // namespace btseg
