#include "divbelief/rng.hpp"

#include <cmath>
#include <numbers>

namespace divbelief {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

} // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t z = seed;
    for (auto& word : s_) {
        word = splitmix64_mix(z);
        z += 0x9E3779B97F4A7C15ULL;
    }
}

Xoshiro256::result_type Xoshiro256::operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (cached_) {
        const double z = *cached_;
        cached_.reset();
        return z;
    }
    // 1 - u lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    return radius * std::cos(angle);
}

} // namespace divbelief
