#include "bpve/truncated_series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpve {

namespace {

// Plain truncated convolution, c[k] = sum_{i+j=k, k<=N} a[i]b[j].
std::vector<double> mul_trunc(const std::vector<double>& a, const std::vector<double>& b,
                              std::size_t n) {
    std::vector<double> out(n + 1, 0.0);
    const std::size_t amax = std::min(a.size(), n + 1);
    for (std::size_t i = 0; i < amax; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const std::size_t bmax = std::min(b.size(), n + 1 - i);
        for (std::size_t j = 0; j < bmax; ++j) out[i + j] += ai * b[j];
    }
    return out;
}

// Formal division num/den with den[0] != 0.
std::vector<double> div_trunc(const std::vector<double>& num, const std::vector<double>& den,
                              std::size_t n) {
    std::vector<double> out(n + 1, 0.0);
    const double d0 = den[0];
    for (std::size_t k = 0; k <= n; ++k) {
        double acc = k < num.size() ? num[k] : 0.0;
        const std::size_t jmax = std::min(k, den.size() - 1);
        for (std::size_t j = 1; j <= jmax; ++j) acc -= den[j] * out[k - j];
        out[k] = acc / d0;
    }
    return out;
}

void check_same_order(const TruncatedSeries& f, const TruncatedSeries& g) {
    if (f.order() != g.order())
        throw std::invalid_argument("truncation orders differ: " + std::to_string(f.order()) +
                                    " vs " + std::to_string(g.order()));
}

}  // namespace

TruncatedSeries::TruncatedSeries(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw std::invalid_argument("empty coefficient vector");
    double sum = 0.0;
    for (double& c : coeffs_) {
        if (c < -kCoeffTol || c > 1.0 + kCoeffTol)
            throw std::domain_error("coefficient outside [0,1]: " + std::to_string(c));
        if (c < 0.0) c = 0.0;
        if (c > 1.0) c = 1.0;
        sum += c;
    }
    if (sum > 1.0 + kMassTol)
        throw std::domain_error("coefficients sum to " + std::to_string(sum) + " > 1");
    tail_mass_ = std::max(0.0, 1.0 - sum);
}

TruncatedSeries TruncatedSeries::point_mass(int state, int order) {
    if (state < 0 || state > order) throw std::invalid_argument("point mass outside truncation");
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    c[static_cast<std::size_t>(state)] = 1.0;
    return TruncatedSeries(std::move(c));
}

TruncatedSeries TruncatedSeries::bernoulli(double mean, int order) {
    if (mean < 0.0 || mean > 1.0) throw std::invalid_argument("bernoulli mean outside [0,1]");
    if (order < 1) throw std::invalid_argument("order must be >= 1");
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    c[0] = 1.0 - mean;
    c[1] = mean;
    return TruncatedSeries(std::move(c));
}

double TruncatedSeries::evaluate(double s) const {
    if (s < 0.0 || s > 1.0) throw std::domain_error("evaluation point outside [0,1]");
    double acc = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 0;) acc = acc * s + coeffs_[k];
    return acc;
}

double TruncatedSeries::mean() const { return factorial_moment(*this, 1); }

double eval(const TruncatedSeries& f, double s) { return f.evaluate(s); }

double FractionalLinear::operator()(double s) const {
    const double v = 1.0 - s;
    return 1.0 - mean * v / (1.0 + shape * v);
}

double FractionalLinear::derivative(double s) const {
    const double d = 1.0 + shape * (1.0 - s);
    return mean / (d * d);
}

FractionalLinear FractionalLinear::compose_with_inner(const FractionalLinear& inner) const {
    return FractionalLinear{mean * inner.mean, inner.shape + shape * inner.mean};
}

TruncatedSeries FractionalLinear::to_series(int order) const {
    if (mean < 0.0 || mean > 1.0 || shape < 0.0)
        throw std::domain_error("fractional linear parameters out of range");
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    // Geometric coefficient form: f[0] = 1 - m/(1+shape),
    // f[k] = m/(1+shape)^2 * r^{k-1} with r = shape/(1+shape).
    const double d = 1.0 + shape;
    c[0] = 1.0 - mean / d;
    const double r = shape / d;
    double run = mean / (d * d);
    for (int k = 1; k <= order; ++k) {
        c[static_cast<std::size_t>(k)] = run;
        run *= r;
    }
    return TruncatedSeries(std::move(c));
}

FractionalLinear LinearFractionalParams::fractional_linear() const {
    return FractionalLinear{a, nu * (1.0 - a) / 2.0};
}

TruncatedSeries compose(const TruncatedSeries& outer, const TruncatedSeries& inner) {
    check_same_order(outer, inner);
    const std::size_t n = static_cast<std::size_t>(outer.order());
    const std::vector<double> g(inner.coeffs().begin(), inner.coeffs().end());
    std::vector<double> acc(n + 1, 0.0);
    acc[0] = outer.coeff(static_cast<int>(n));
    for (std::size_t k = n; k-- > 0;) {
        acc = mul_trunc(acc, g, n);
        acc[0] += outer.coeff(static_cast<int>(k));
    }
    return TruncatedSeries(std::move(acc));
}

TruncatedSeries compose_fractional_linear(const FractionalLinear& outer,
                                          const TruncatedSeries& inner) {
    const std::size_t n = static_cast<std::size_t>(inner.order());
    // 1 - outer(g) = mean*w / (1 + shape*w) with w = 1 - g.
    std::vector<double> w(n + 1, 0.0);
    w[0] = 1.0 - inner.coeff(0);
    for (std::size_t k = 1; k <= n; ++k) w[k] = -inner.coeff(static_cast<int>(k));
    if (outer.shape == 0.0) {
        // Affine outer: 1 - mean*w directly.
        std::vector<double> out(n + 1, 0.0);
        out[0] = 1.0 - outer.mean * w[0];
        for (std::size_t k = 1; k <= n; ++k) out[k] = -outer.mean * w[k];
        return TruncatedSeries(std::move(out));
    }
    std::vector<double> den(n + 1, 0.0);
    for (std::size_t k = 0; k <= n; ++k) den[k] = outer.shape * w[k];
    den[0] += 1.0;
    std::vector<double> u = div_trunc(w, den, n);
    std::vector<double> out(n + 1, 0.0);
    out[0] = 1.0 - outer.mean * u[0];
    for (std::size_t k = 1; k <= n; ++k) out[k] = -outer.mean * u[k];
    return TruncatedSeries(std::move(out));
}

TruncatedSeries power(const TruncatedSeries& f, long long x) {
    if (x < 0) throw std::invalid_argument("negative power");
    const std::size_t n = static_cast<std::size_t>(f.order());
    if (x == 0) return TruncatedSeries::point_mass(0, f.order());
    std::vector<double> base(f.coeffs().begin(), f.coeffs().end());
    std::vector<double> acc;
    bool have = false;
    while (x > 0) {
        if (x & 1) {
            acc = have ? mul_trunc(acc, base, n) : base;
            have = true;
        }
        x >>= 1;
        if (x > 0) base = mul_trunc(base, base, n);
    }
    return TruncatedSeries(std::move(acc));
}

TruncatedSeries multiply(const TruncatedSeries& f, const TruncatedSeries& g) {
    check_same_order(f, g);
    const std::vector<double> a(f.coeffs().begin(), f.coeffs().end());
    const std::vector<double> b(g.coeffs().begin(), g.coeffs().end());
    return TruncatedSeries(mul_trunc(a, b, a.size() - 1));
}

TruncatedSeries scale_argument(const TruncatedSeries& f, double c) {
    if (c < 0.0 || c > 1.0) throw std::domain_error("argument scale outside [0,1]");
    std::vector<double> out(f.coeffs().begin(), f.coeffs().end());
    double ck = 1.0;
    for (std::size_t k = 1; k < out.size(); ++k) {
        ck *= c;
        out[k] *= ck;
    }
    return TruncatedSeries(std::move(out));
}

double factorial_moment(const TruncatedSeries& f, int k) {
    if (k < 1 || k > f.order())
        throw std::invalid_argument("factorial moment order must be in [1, N]");
    double acc = 0.0;
    for (int j = f.order(); j >= k; --j) {
        double w = 1.0;
        for (int i = 0; i < k; ++i) w *= static_cast<double>(j - i);
        acc += w * f.coeff(j);
    }
    return acc;
}

TruncatedSeries lf_gf(const LinearFractionalParams& p, int order) {
    if (p.a < 0.0 || p.a > 1.0 || p.nu < 0.0)
        throw std::domain_error("linear fractional parameters out of range");
    return p.fractional_linear().to_series(order);
}

LinearFractionalParams lf_compose(const LinearFractionalParams& p,
                                  const LinearFractionalParams& q) {
    if (p.nu != q.nu) throw std::invalid_argument("nu mismatch in lf_compose");
    return LinearFractionalParams{p.a * q.a, p.nu};
}

std::vector<double> series_log(const TruncatedSeries& f) {
    if (f.coeff(0) <= 0.0) throw std::domain_error("series_log requires f[0] > 0");
    const int n = f.order();
    std::vector<double> a(static_cast<std::size_t>(n) + 1, 0.0);
    a[0] = std::log(f.coeff(0));
    // From f' = a' f: k f[k] = sum_{j=1..k} j a[j] f[k-j].
    for (int k = 1; k <= n; ++k) {
        double acc = static_cast<double>(k) * f.coeff(k);
        for (int j = 1; j < k; ++j) acc -= static_cast<double>(j) * a[static_cast<std::size_t>(j)] * f.coeff(k - j);
        a[static_cast<std::size_t>(k)] = acc / (static_cast<double>(k) * f.coeff(0));
    }
    return a;
}

std::vector<double> series_exp_coeffs(std::span<const double> c, int order) {
    const std::size_t n = static_cast<std::size_t>(order);
    std::vector<double> b(n + 1, 0.0);
    b[0] = std::exp(c.empty() ? 0.0 : c[0]);
    // From b' = c' b: k b[k] = sum_{j=1..k} j c[j] b[k-j].
    const std::size_t cmax = c.empty() ? 0 : c.size() - 1;
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = 0.0;
        const std::size_t jmax = std::min(k, cmax);
        for (std::size_t j = 1; j <= jmax; ++j)
            acc += static_cast<double>(j) * c[j] * b[k - j];
        b[k] = acc / static_cast<double>(k);
    }
    return b;
}

TruncatedSeries series_exp(std::span<const double> c, int order) {
    return TruncatedSeries(series_exp_coeffs(c, order));
}

TruncatedSeries divide_gf(const TruncatedSeries& num, const TruncatedSeries& den) {
    check_same_order(num, den);
    if (den.coeff(0) <= 0.0) throw std::domain_error("divide_gf requires den[0] > 0");
    const std::vector<double> a(num.coeffs().begin(), num.coeffs().end());
    const std::vector<double> b(den.coeffs().begin(), den.coeffs().end());
    return TruncatedSeries(div_trunc(a, b, a.size() - 1));
}

}  // namespace bpve
