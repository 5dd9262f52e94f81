#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace stylesim {

/// SplitMix64 finalizer; used for counter-based seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over bytes. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) { return mix64(parent ^ mix64(tag)); }

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) {
    return derive_seed(parent, fnv1a(tag));
}

/// Maps 64 random bits to [0, 1) with 53-bit resolution.
constexpr double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Deterministic pseudo-random stream. Distribution transforms are done here rather than with
/// <random> distributions, whose output is implementation-defined.
class RandomStream {
public:
    RandomStream() = default;
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unit_interval(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Exponential with the given rate (events per unit).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    bool operator==(const RandomStream&) const = default;

private:
    std::mt19937_64 engine_{0};
};

}  // namespace stylesim
