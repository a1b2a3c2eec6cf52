#include "bpve/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bpve/errors.hpp"

namespace bpve {

double EnvironmentSpec::mean_at(long long n) const {
    if (n < 1) throw std::invalid_argument("generation index must be >= 1");
    if (n < start_index()) return 1.0;
    return 1.0 - alpha / static_cast<double>(n);
}

FractionalLinear EnvironmentSpec::offspring_params(long long n) const {
    const double a = mean_at(n);
    if (family == OffspringFamily::bernoulli || a >= 1.0) return FractionalLinear{a, 0.0};
    // Second factorial moment pinned to nu*(1-a) exactly: shape = nu*(1-a)/(2a).
    return FractionalLinear{a, nu * (1.0 - a) / (2.0 * a)};
}

double EnvironmentSpec::offspring_eval(long long n, double s) const {
    return offspring_params(n)(s);
}

void EnvironmentSpec::validate() const {
    if (alpha <= 0.0) throw ConfigError("environment alpha must be > 0");
    if (nu < 0.0) throw ConfigError("environment nu must be >= 0");
    if (family == OffspringFamily::bernoulli && nu != 0.0)
        throw ConfigError("bernoulli offspring forces nu = 0");
    double total_weight = 0.0;
    for (const auto& atom : immigration) {
        if (atom.value < 1) throw ConfigError("immigration support values must be >= 1");
        if (atom.weight < 0.0) throw ConfigError("immigration weights must be >= 0");
        total_weight += atom.weight;
    }
    // Largest 1 - fbar_n occurs at n = start_index; the scaled law must be a pmf there.
    const double worst = alpha / static_cast<double>(start_index());
    if (total_weight * worst > 1.0 + 1e-12)
        throw ConfigError("immigration weights too large: pmf invalid at n = start_index");
}

ScalingTable::ScalingTable(const EnvironmentSpec& spec) : spec_(spec) {
    cumlog_.reserve(1024);
    cumlog_.push_back(0.0);  // empty product at m = 0
}

void ScalingTable::extend(long long m) {
    while (static_cast<long long>(cumlog_.size()) <= m) {
        const long long k = static_cast<long long>(cumlog_.size());
        if (k > kHorizonCap) throw std::runtime_error("scaling table horizon exhausted");
        cumlog_.push_back(cumlog_.back() + std::log(spec_.mean_at(k)));
    }
}

long long ScalingTable::scaling_A(long long n) {
    if (n < 1) throw std::invalid_argument("scaling_A requires n >= 1");
    // Relative guard absorbs float rounding of the telescoping product, so
    // e.g. alpha = 1 yields A(n) = n exactly.
    const double target = -std::log(static_cast<double>(n)) + 1e-12;
    long long hi = std::max<long long>(4, static_cast<long long>(cumlog_.size()) - 1);
    extend(hi);
    while (cumlog_[static_cast<std::size_t>(hi)] > target) {
        if (hi >= kHorizonCap) throw std::runtime_error("scaling_A: horizon exhausted");
        hi = std::min(kHorizonCap, hi * 2);
        extend(hi);
    }
    long long lo = 0;  // cumlog_[lo] > target guaranteed false only for n=1; handle below
    if (cumlog_[0] <= target) return 1;
    while (hi - lo > 1) {
        const long long mid = lo + (hi - lo) / 2;
        if (cumlog_[static_cast<std::size_t>(mid)] <= target)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double ScalingTable::cumulative_mean(long long j, long long n) {
    if (j < 0 || j > n) throw std::invalid_argument("cumulative_mean requires 0 <= j <= n");
    extend(n);
    return std::exp(cumlog_[static_cast<std::size_t>(n)] - cumlog_[static_cast<std::size_t>(j)]);
}

TruncatedSeries offspring_gf(const EnvironmentSpec& spec, long long n, int order) {
    return spec.offspring_params(n).to_series(order);
}

TruncatedSeries immigration_gf(const EnvironmentSpec& spec, long long n, int order) {
    if (!spec.has_immigration()) throw std::logic_error("no immigration configured");
    if (n < 1) throw std::invalid_argument("generation index must be >= 1");
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    const double scale = 1.0 - spec.mean_at(n);
    double mass = 0.0;
    for (const auto& atom : spec.immigration) {
        if (atom.value > order) throw std::invalid_argument("immigration support beyond truncation");
        c[static_cast<std::size_t>(atom.value)] += atom.weight * scale;
        mass += atom.weight * scale;
    }
    if (mass > 1.0 + 1e-12) throw std::domain_error("immigration pmf invalid at this generation");
    c[0] = 1.0 - std::min(1.0, mass);
    return TruncatedSeries(std::move(c));
}

double cumulative_mean(const EnvironmentSpec& spec, long long j, long long n) {
    if (j < 0 || j > n) throw std::invalid_argument("cumulative_mean requires 0 <= j <= n");
    double acc = 1.0;
    for (long long k = j + 1; k <= n; ++k) acc *= spec.mean_at(k);
    return acc;
}

long long scaling_A(const EnvironmentSpec& spec, long long n) {
    ScalingTable table(spec);
    return table.scaling_A(n);
}

double shape_function(const TruncatedSeries& f, double s) {
    const double fbar = f.mean();
    if (fbar <= 0.0) throw std::domain_error("shape function needs fbar > 0");
    if (s == 1.0) return factorial_moment(f, 2) / (2.0 * fbar * fbar);
    const double fs = f.evaluate(s);
    if (fs >= 1.0) throw std::domain_error("degenerate offspring: f(s) = 1 below 1");
    return 1.0 / (1.0 - fs) - 1.0 / (fbar * (1.0 - s));
}

ConditionDiagnostics condition_diagnostics(const EnvironmentSpec& spec, long long horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    ConditionDiagnostics out;
    out.horizon = horizon;

    // Toeplitz sums sum_j a^{(k)}_{n,j} x_j with x_j = f_j''(1)/(2(1-fbar_j)),
    // n = horizon. Accumulated backwards so the cumulative products
    // fbar_{j,n}^k build up one factor at a time.
    double prod1 = 1.0;  // fbar_{j,n}
    double prod2 = 1.0;  // fbar_{j,n}^2
    double sum1 = 0.0, sum2 = 0.0, sum_def = 0.0;
    for (long long j = horizon; j >= 1; --j) {
        const double fbar = spec.mean_at(j);
        const double defect = 1.0 - fbar;
        sum_def += defect;
        if (defect > 0.0) {
            const double x = spec.offspring_params(j).second_factorial_moment() / (2.0 * defect);
            sum1 += defect * prod1 * x;
            sum2 += defect * prod2 * x;
        }
        prod1 *= fbar;
        prod2 *= fbar * fbar;
    }
    out.toeplitz_k1 = sum1;
    out.toeplitz_k2 = sum2;
    out.sum_one_minus_mean = sum_def;

    const double fbar_n = spec.mean_at(horizon);
    if (fbar_n < 1.0) {
        const FractionalLinear f = spec.offspring_params(horizon);
        const double phi1 = f.second_factorial_moment() / (2.0 * f.mean * f.mean);
        double sup = 0.0;
        for (int i = 0; i < 100; ++i) {
            const double s = static_cast<double>(i) / 100.0;
            const double fs = f(s);
            const double phi = 1.0 / (1.0 - fs) - 1.0 / (f.mean * (1.0 - s));
            sup = std::max(sup, std::abs(phi1 - phi));
        }
        out.shape_uniformity = sup / (1.0 - fbar_n);
    }
    return out;
}

}  // namespace bpve
