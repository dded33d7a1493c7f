#ifndef QNOISE_RANDOM_HPP
#define QNOISE_RANDOM_HPP

// Counter-based and sequential generators with platform-independent output.
// The standard library's distributions are implementation-defined, so the
// uniform and normal transforms are spelled out here.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace qnoise::rng {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash of (seed, stream, index, lane). Distinct keys give independent-looking
/// 64-bit words; the same key always gives the same word.
constexpr std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                              std::uint64_t lane) noexcept {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (stream * 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ index);
    h = mix64(h ^ (lane * 0xa0761d6478bd642fULL));
    return h;
}

/// Uniform on [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform on [-1, 1).
constexpr double to_symmetric(std::uint64_t bits) noexcept { return 2.0 * to_unit(bits) - 1.0; }

/// SplitMix64 stream; satisfies UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() noexcept { return to_unit((*this)()); }

    // Box-Muller; one draw per call, the sine branch is discarded.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

}  // namespace qnoise::rng

#endif  // QNOISE_RANDOM_HPP
