#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace cara::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x = splitmix64(x);
            s = x;
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

/// Independent stream for (seed, index): the generator is seeded with a hash of
/// both, so stream k is the same no matter how many others exist.
inline Xoshiro256 stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0) {
    return Xoshiro256(splitmix64(splitmix64(seed ^ (domain * 0xd1b54a32d192ed03ULL)) + index));
}

/// Box-Muller on top of the stream. std::normal_distribution is avoided so
/// draws do not depend on the standard library implementation.
class StandardNormal {
public:
    template <class Gen>
    double operator()(Gen& g) {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = to_unit(g());
        } while (u1 <= 0.0);
        const double u2 = to_unit(g());
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cara::rng
