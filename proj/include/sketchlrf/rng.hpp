#ifndef SKETCHLRF_RNG_HPP
#define SKETCHLRF_RNG_HPP

#include <cassert>
#include <cmath>
#include <cstdint>

namespace sketchlrf::rng {

// Counter-based generator built on the SplitMix64 finalizer. Every draw is a
// pure function of (seed, counter), so streams are reproducible across
// platforms and trivially splittable into independent roles.
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

/// Word at position `counter` of the stream identified by `seed`.
constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
    return mix(seed + kGolden * (counter + 1));
}

/// Derive an independent stream seed from a master seed and a role tag.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    return mix(seed ^ mix(tag));
}

/// Uniform in [0, 1) with 53 bits of mantissa.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(at(seed, counter) >> 11) * 0x1.0p-53;
}

/// Uniform in (0, 1], safe as a log() argument.
inline double uniform01_open(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>((at(seed, counter) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; entry i consumes counters 2i and 2i+1.
inline double gaussian(std::uint64_t seed, std::uint64_t index) {
    const double u1 = uniform01_open(seed, 2 * index);
    const double u2 = uniform01(seed, 2 * index + 1);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Rademacher sign in {-1, +1}.
inline int sign(std::uint64_t seed, std::uint64_t counter) {
    return (at(seed, counter) & 1ULL) ? 1 : -1;
}

/// Integer uniform in [0, bound). bound must be positive.
inline std::uint64_t below(std::uint64_t seed, std::uint64_t counter, std::uint64_t bound) {
    assert(bound > 0);
    return at(seed, counter) % bound;
}

}  // namespace sketchlrf::rng

#endif  // SKETCHLRF_RNG_HPP
