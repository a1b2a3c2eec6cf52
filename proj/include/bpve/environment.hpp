#pragma once

#include <cstdint>
#include <vector>

#include "bpve/truncated_series.hpp"

namespace bpve {

enum class OffspringFamily { bernoulli, linear_fractional };

/// One atom of the immigration law: P(eps_n = value) = weight * (1 - fbar_n).
struct ImmigrationAtom {
    int value = 1;      // k >= 1
    double weight = 0;  // c_k >= 0
};

/// A varying environment with offspring means fbar_n = 1 - alpha/n for
/// n >= start_index (= floor(alpha)+1) and 1 before, plus an optional
/// bounded-support immigration law scaled by (1 - fbar_n).
struct EnvironmentSpec {
    OffspringFamily family = OffspringFamily::linear_fractional;
    double alpha = 1.0;
    double nu = 0.0;
    std::vector<ImmigrationAtom> immigration;

    long long start_index() const { return static_cast<long long>(alpha) + 1; }
    double mean_at(long long n) const;
    bool has_immigration() const { return !immigration.empty(); }

    /// Offspring pmf evaluated at a scalar point, exact (no truncation).
    double offspring_eval(long long n, double s) const;

    /// Closed-form parameters of the offspring g.f. in generation n.
    FractionalLinear offspring_params(long long n) const;

    void validate() const;
};

/// Scaling sequence A(n) = min{m >= 1 : fbar_{0,m} <= 1/n} plus cached
/// cumulative mean products. Grown on demand; read-only afterwards.
class ScalingTable {
public:
    static constexpr long long kHorizonCap = 1'000'000;

    explicit ScalingTable(const EnvironmentSpec& spec);

    long long scaling_A(long long n);

    /// fbar_{j,n} = prod_{k=j+1..n} fbar_k.
    double cumulative_mean(long long j, long long n);

private:
    void extend(long long m);

    EnvironmentSpec spec_;
    std::vector<double> cumlog_;  // cumlog_[m] = sum_{k<=m} log fbar_k
};

TruncatedSeries offspring_gf(const EnvironmentSpec& spec, long long n, int order);
TruncatedSeries immigration_gf(const EnvironmentSpec& spec, long long n, int order);
double cumulative_mean(const EnvironmentSpec& spec, long long j, long long n);
long long scaling_A(const EnvironmentSpec& spec, long long n);

/// Shape function phi(s) = 1/(1-f(s)) - 1/(fbar*(1-s)); at s = 1 returns
/// f''(1) / (2 fbar^2).
double shape_function(const TruncatedSeries& f, double s);

/// Numeric diagnostics for the environment conditions at a given horizon.
struct ConditionDiagnostics {
    long long horizon = 0;
    double toeplitz_k1 = 0;       // -> nu/2
    double toeplitz_k2 = 0;       // -> nu/4
    double shape_uniformity = 0;  // sup_s |phi_n(1)-phi_n(s)| / (1-fbar_n) at n = horizon
    double sum_one_minus_mean = 0;
};

ConditionDiagnostics condition_diagnostics(const EnvironmentSpec& spec, long long horizon);

}  // namespace bpve
