#include "bpve/discrete_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpve {

namespace {

// One offspring draw from the closed-form generation law: value 0 with
// probability f[0], otherwise 1 + Geom0(r) on the geometric tail.
long long draw_offspring(const FractionalLinear& f, RandomStream& stream) {
    const double d = 1.0 + f.shape;
    const double p0 = 1.0 - f.mean / d;
    if (stream.uniform() < p0) return 0;
    return 1 + stream.geometric0(f.shape / d);
}

long long draw_immigration(const EnvironmentSpec& spec, long long gen, RandomStream& stream) {
    const double scale = 1.0 - spec.mean_at(gen);
    if (scale <= 0.0) return 0;
    double u = stream.uniform();
    for (const auto& atom : spec.immigration) {
        u -= atom.weight * scale;
        if (u < 0.0) return atom.value;
    }
    return 0;
}

long long draw_from_cdf(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) return static_cast<long long>(cdf.size()) - 1;
    return static_cast<long long>(it - cdf.begin());
}

PathSample simulate_forward(const EnvironmentSpec& spec, const SimGrid& grid,
                            RandomStream& stream, long long population_cap, bool with_y) {
    PathSample out;
    out.times = grid.times;
    out.states.assign(grid.times.size(), 0);
    out.n = grid.n;

    long long pop = with_y ? 0 : 1;
    const long long last = grid.generations.empty() ? 0 : grid.generations.back();
    std::size_t next_record = 0;
    while (next_record < grid.generations.size() && grid.generations[next_record] == 0) {
        out.states[next_record++] = pop;
    }
    for (long long k = 1; k <= last; ++k) {
        if (!with_y && pop == 0) break;  // extinction is absorbing without immigration
        const FractionalLinear f = spec.offspring_params(k);
        long long next = 0;
        if (f.mean == 1.0 && f.shape == 0.0) {
            next = pop;  // degenerate generations keep every line
        } else {
            for (long long i = 0; i < pop; ++i) next += draw_offspring(f, stream);
        }
        if (with_y) next += draw_immigration(spec, k, stream);
        pop = next;
        if (pop > population_cap) {
            out.overflow = true;
            return out;
        }
        while (next_record < grid.generations.size() && grid.generations[next_record] == k) {
            out.states[next_record++] = pop;
        }
    }
    while (next_record < grid.generations.size()) out.states[next_record++] = pop;
    return out;
}

}  // namespace

SimGrid::SimGrid(ScalingTable& table, long long n_, std::vector<double> times_)
    : n(n_), times(std::move(times_)) {
    if (n < 1) throw std::invalid_argument("scale parameter must be >= 1");
    if (!std::is_sorted(times.begin(), times.end()))
        throw std::invalid_argument("time grid must be sorted");
    generations.reserve(times.size());
    for (double t : times) {
        if (t <= 0.0) throw std::invalid_argument("grid times must be positive");
        const long long m = static_cast<long long>(std::floor(static_cast<double>(n) * t));
        if (m < 1) throw std::invalid_argument("n*t below 1: scale too small for this grid");
        generations.push_back(table.scaling_A(m));
    }
}

PathSample simulate_x(const EnvironmentSpec& spec, const SimGrid& grid, RandomStream& stream,
                      long long population_cap) {
    return simulate_forward(spec, grid, stream, population_cap, false);
}

PathSample simulate_y(const EnvironmentSpec& spec, const SimGrid& grid, RandomStream& stream,
                      long long population_cap) {
    if (!spec.has_immigration()) {
        PathSample out;
        out.times = grid.times;
        out.states.assign(grid.times.size(), 0);
        out.n = grid.n;
        return out;
    }
    return simulate_forward(spec, grid, stream, population_cap, true);
}

ConditionedXSampler::ConditionedXSampler(const EnvironmentSpec& spec, ScalingTable& table,
                                         long long n, std::vector<double> grid_times, int order)
    : grid_(table, n, std::move(grid_times)),
      chain_(spec,
             [&] {
                 std::vector<long long> cps = grid_.generations;
                 cps.push_back(0);
                 return cps;
             }(),
             order) {
    if (std::find(grid_.times.begin(), grid_.times.end(), 1.0) == grid_.times.end())
        throw std::invalid_argument("conditioned sampling requires t = 1 on the grid");
    const long long cond_gen = table.scaling_A(n);
    const auto& cps = chain_.checkpoints();
    condition_checkpoint_ =
        static_cast<std::size_t>(std::find(cps.begin(), cps.end(), cond_gen) - cps.begin());

    // Extinction probabilities toward the conditioning generation, by the
    // exact scalar recursion.
    extinction_.assign(cps.size(), 0.0);
    {
        double cur = 0.0;
        std::size_t ci = condition_checkpoint_;
        for (long long k = cond_gen; k >= 1; --k) {
            cur = spec.offspring_params(k)(cur);
            if (ci > 0 && k - 1 == cps[ci - 1]) extinction_[--ci] = cur;
        }
    }
    const std::vector<double>& z = extinction_;

    // Eager CDF tables: cdf_[segment][from_state] over next states 0..order.
    // Conditioned segments weight the forward pmf by 1 - z_next^y.
    cdf_.resize(chain_.segment_count());
    for (std::size_t seg = 0; seg < chain_.segment_count(); ++seg) {
        const bool conditioned = cps[seg + 1] <= cond_gen;
        const TruncatedSeries& step = chain_.segment_x(seg);
        const long long states = std::min<long long>(kEagerStates, order);
        auto& rows = cdf_[seg];
        rows.resize(static_cast<std::size_t>(states) + 1);
        TruncatedSeries pow_x = TruncatedSeries::point_mass(0, order);
        for (long long x = 0; x <= states; ++x) {
            if (x > 0) pow_x = multiply(pow_x, step);
            auto& row = rows[static_cast<std::size_t>(x)];
            row.resize(static_cast<std::size_t>(order) + 1);
            double acc = 0.0;
            for (int y = 0; y <= order; ++y) {
                double w = pow_x.coeff(y);
                if (conditioned)
                    w *= 1.0 - std::pow(z[seg + 1], static_cast<double>(y));
                acc += w;
                row[static_cast<std::size_t>(y)] = acc;
            }
            if (acc > 0.0)
                for (double& v : row) v /= acc;
        }
    }
}

PathSample ConditionedXSampler::sample(RandomStream& stream) const {
    PathSample out;
    out.times = grid_.times;
    out.states.assign(grid_.times.size(), 0);
    out.n = grid_.n;
    out.conditioned = true;

    const auto& cps = chain_.checkpoints();
    long long state = 1;
    for (std::size_t seg = 0; seg < chain_.segment_count(); ++seg) {
        if (state == 0) {
            // Only possible past the conditioning time; extinction absorbs.
        } else if (state < static_cast<long long>(cdf_[seg].size())) {
            state = draw_from_cdf(cdf_[seg][static_cast<std::size_t>(state)], stream.uniform());
        } else {
            // Rare large state: build the row on the fly.
            const TruncatedSeries pow_x = power(chain_.segment_x(seg), state);
            const bool conditioned = seg + 1 <= condition_checkpoint_;
            const double z_next = conditioned ? extinction_[seg + 1] : 0.0;
            std::vector<double> row(static_cast<std::size_t>(chain_.order()) + 1, 0.0);
            double acc = 0.0;
            for (int y = 0; y <= chain_.order(); ++y) {
                double w = pow_x.coeff(y);
                if (conditioned) w *= 1.0 - std::pow(z_next, static_cast<double>(y));
                acc += w;
                row[static_cast<std::size_t>(y)] = acc;
            }
            for (double& v : row) v /= acc;
            state = draw_from_cdf(row, stream.uniform());
        }
        // Record grid entries that live at this checkpoint.
        for (std::size_t g = 0; g < grid_.generations.size(); ++g)
            if (grid_.generations[g] == cps[seg + 1]) out.states[g] = state;
    }
    return out;
}

}  // namespace bpve
