#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bpve {

/// One reproducible random stream per (scenario_seed, replicate_index).
/// The pair is mixed through splitmix64 into the engine seed, so distinct
/// replicate indices give unrelated streams and the map is a pure function.
/// All variates are derived from uniforms by explicit inverse transforms;
/// no implementation-defined <random> distributions are used.
class RandomStream {
public:
    RandomStream(std::uint64_t scenario_seed, std::uint64_t replicate_index)
        : eng_(mix(scenario_seed, replicate_index)) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1], safe as a log argument.
    double uniform_positive() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_positive()) / rate; }

    /// Geometric on {0,1,...} with failure ratio r in [0,1): P(k) = (1-r) r^k.
    long long geometric0(double r) {
        if (r <= 0.0) return 0;
        return static_cast<long long>(std::log(uniform_positive()) / std::log(r));
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
        // splitmix64 over the concatenated pair.
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 eng_;
};

}  // namespace bpve
