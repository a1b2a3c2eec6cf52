#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "bpve/environment.hpp"
#include "bpve/exact_engine.hpp"
#include "bpve/rng.hpp"

namespace bpve {

/// States of one replicate observed at the scaled time grid.
struct PathSample {
    std::vector<double> times;
    std::vector<long long> states;
    long long n = 0;
    bool conditioned = false;
    bool overflow = false;
};

/// Scaled observation grid: generation A(floor(n*t)) per grid time.
struct SimGrid {
    long long n = 0;
    std::vector<double> times;
    std::vector<long long> generations;

    SimGrid(ScalingTable& table, long long n, std::vector<double> times);
};

constexpr long long kDefaultPopulationCap = 1'000'000;

/// Exact forward simulation of X generation by generation; offspring draws
/// use the closed-form inverse CDF of the generation law (Bernoulli or
/// geometric-tailed), so there is no truncation anywhere.
PathSample simulate_x(const EnvironmentSpec& spec, const SimGrid& grid, RandomStream& stream,
                      long long population_cap = kDefaultPopulationCap);

/// Forward simulation of Y (immigration added each generation), Y_0 = 0.
PathSample simulate_y(const EnvironmentSpec& spec, const SimGrid& grid, RandomStream& stream,
                      long long population_cap = kDefaultPopulationCap);

/// Samples exactly from L((X_{A(n t_i)})_i | X_{A(n)} > 0) by a Doob
/// h-transform over the checkpoint chain: each checkpoint-to-checkpoint jump
/// draws from the forward transition pmf reweighted by the survival function
/// h_k(x) = 1 - f_{k,A(n)}(0)^x; past t = 1 the path continues unconditioned.
/// The grid must contain t = 1.
class ConditionedXSampler {
public:
    ConditionedXSampler(const EnvironmentSpec& spec, ScalingTable& table, long long n,
                        std::vector<double> grid_times, int order);

    PathSample sample(RandomStream& stream) const;

    const SimGrid& grid() const { return grid_; }
    const CompositionChain& chain() const { return chain_; }

private:
    SimGrid grid_;
    CompositionChain chain_;
    std::size_t condition_checkpoint_;  // index of A(n) among chain checkpoints
    std::vector<double> extinction_;    // f_{g_i, A(n)}(0) per checkpoint i
    // CDF tables per (segment, from-state), built eagerly for small states;
    // rare larger states are rebuilt on the fly.
    std::vector<std::vector<std::vector<double>>> cdf_;
    static constexpr long long kEagerStates = 128;
};

}  // namespace bpve
