#pragma once

#include <optional>
#include <vector>

#include "bpve/environment.hpp"
#include "bpve/truncated_series.hpp"

namespace bpve {

/// Exact distributions of X_n and Y_n along one environment, computed by a
/// single backward sweep over the generations. Checkpoints are the
/// generations the caller wants marginals and transition laws for; segment
/// series between consecutive checkpoints are cached so repeated queries on
/// one chain are cheap.
class CompositionChain {
public:
    CompositionChain(const EnvironmentSpec& spec, std::vector<long long> checkpoints, int order,
                     bool with_immigration = false);

    const EnvironmentSpec& spec() const { return spec_; }
    int order() const { return order_; }
    const std::vector<long long>& checkpoints() const { return checkpoints_; }
    std::size_t segment_count() const { return checkpoints_.size() - 1; }

    /// f_{g_i, g_{i+1}}: offspring composition across segment i.
    const TruncatedSeries& segment_x(std::size_t i) const { return segments_x_[i]; }

    /// g_{g_i, g_{i+1}}: immigration product across segment i (Y started at 0).
    const TruncatedSeries& segment_y(std::size_t i) const;

    /// f_{0, g_i} (checkpoint marginal of X from X_0 = 1).
    const TruncatedSeries& marginal_x(std::size_t i) const { return marginals_x_[i]; }

    /// g_{0, g_i} (checkpoint marginal of Y from Y_0 = 0).
    const TruncatedSeries& marginal_y(std::size_t i) const;

    /// f_{g_i, g_last}(0): extinction probability at the last checkpoint
    /// starting from one individual at checkpoint i. Computed by the exact
    /// scalar recursion, independently of the series route.
    double extinction_from(std::size_t i) const { return extinct_[i]; }

private:
    EnvironmentSpec spec_;
    int order_;
    std::vector<long long> checkpoints_;
    std::vector<TruncatedSeries> segments_x_;
    std::vector<TruncatedSeries> marginals_x_;
    std::vector<TruncatedSeries> segments_y_;
    std::vector<TruncatedSeries> marginals_y_;
    std::vector<double> extinct_;
    bool with_immigration_;
};

TruncatedSeries marginal_pmf_x(const EnvironmentSpec& spec, long long n, int order);
double survival_probability(const EnvironmentSpec& spec, long long n, int order);
TruncatedSeries conditional_pmf_survival(const EnvironmentSpec& spec, long long n, int order);
TruncatedSeries transition_pmf_x(const EnvironmentSpec& spec, long long j, long long n,
                                 long long x, int order);
TruncatedSeries marginal_pmf_y(const EnvironmentSpec& spec, long long n, int order);
TruncatedSeries transition_pmf_y(const EnvironmentSpec& spec, long long j, long long n,
                                 long long y, int order);
double conditional_mean_x(const EnvironmentSpec& spec, long long j, long long n, int order);

}  // namespace bpve
