#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace divbelief {

/// SplitMix64 finalizer. Used only to derive seeds and fill generator state.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Substream domains. A substream is identified by (master seed, domain, index).
enum class StreamDomain : std::uint64_t {
    Driver = 1,      // Brownian driver / dividend increments, index = path
    Agent = 2,       // per-agent characteristic draws, index = agent
    Sweep = 3,       // master seeds for seed sweeps, index = sweep position
    Contest = 4,     // random beauty-contest specs, index = draw
    Reference = 5,   // reference-measure checks, index = path
};

/// Seed for substream (master, domain, index):
///   key = mix(mix(master ^ mix(domain)) ^ mix(index))
/// Distinct (domain, index) pairs give unrelated streams, and the rule does not
/// depend on how many other streams exist (agent-prefix property).
constexpr std::uint64_t stream_seed(std::uint64_t master, StreamDomain domain,
                                    std::uint64_t index) noexcept {
    const auto d = splitmix64_mix(static_cast<std::uint64_t>(domain));
    return splitmix64_mix(splitmix64_mix(master ^ d) ^ splitmix64_mix(index));
}

/// xoshiro256** 1.0 (Blackman & Vigna), state filled from a SplitMix64 sequence.
/// Platform independent: all arithmetic is on fixed-width unsigned integers.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
};

/// Random source with portable uniform and gaussian transforms. The std::
/// distributions are avoided on purpose: their output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : engine_(seed) {}
    Rng(std::uint64_t master, StreamDomain domain, std::uint64_t index) noexcept
        : engine_(stream_seed(master, domain, index)) {}

    std::uint64_t next_u64() noexcept { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
    Xoshiro256 engine_;
    std::optional<double> cached_;
};

} // namespace divbelief
