#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace rummage {

using Rng = std::mt19937_64;

/// Small counter-based generator for per-sample streams, so that parallel
/// work draws the same numbers regardless of how it is scheduled.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    SplitMix64(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) : state_(mix(mix(seed ^ mix(a)) ^ b)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace rummage
