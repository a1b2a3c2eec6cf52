#pragma once

#include <span>
#include <vector>

namespace bpve {

/// Probability generating function truncated at a fixed order N.
///
/// Coefficient k holds P(value = k); mass supported above N is kept in
/// tail_mass so that sum(coeffs) + tail_mass == 1. Truncated operations are
/// conservative: coefficients they produce are never larger than the exact
/// ones, so lost mass always ends up in the tail, never the other way round.
class TruncatedSeries {
public:
    // Coefficients in (-kCoeffTol, 0) are clamped to zero; anything more
    // negative, or above 1 + kCoeffTol, is rejected.
    static constexpr double kCoeffTol = 1e-12;
    static constexpr double kMassTol = 1e-10;

    /// Builds a series from pmf coefficients; tail_mass := 1 - sum.
    explicit TruncatedSeries(std::vector<double> coeffs);

    static TruncatedSeries point_mass(int state, int order);
    static TruncatedSeries bernoulli(double mean, int order);

    int order() const { return static_cast<int>(coeffs_.size()) - 1; }
    double coeff(int k) const { return coeffs_[static_cast<std::size_t>(k)]; }
    std::span<const double> coeffs() const { return coeffs_; }
    double tail_mass() const { return tail_mass_; }

    /// Horner evaluation of the polynomial part; s must lie in [0, 1].
    double evaluate(double s) const;

    double mean() const;

private:
    std::vector<double> coeffs_;
    double tail_mass_ = 0.0;
};

/// Linear fractional distribution in the two-parameter rational form
///   f(s) = 1 - mean*(1-s) / (1 + shape*(1-s)),   mean in [0,1], shape >= 0.
/// shape = 0 degenerates to Bernoulli(mean). Closed under composition:
/// outer(A,B) o inner(A',B') = (A*A', B' + B*A').
struct FractionalLinear {
    double mean = 1.0;
    double shape = 0.0;

    double operator()(double s) const;
    double derivative(double s) const;
    double second_factorial_moment() const { return 2.0 * mean * shape; }
    FractionalLinear compose_with_inner(const FractionalLinear& inner) const;
    TruncatedSeries to_series(int order) const;
};

/// The one-parameter family h_a from the limit theory: mean a, with the
/// second parameter tied to a fixed environment parameter nu via
/// shape = nu*(1-a)/2. Closed under composition with a multiplying.
struct LinearFractionalParams {
    double a = 1.0;
    double nu = 0.0;

    FractionalLinear fractional_linear() const;
};

double eval(const TruncatedSeries& f, double s);

/// outer(inner(s)) truncated at the common order. Horner over truncated
/// polynomial products, O(N^3); both inputs must share the same order.
TruncatedSeries compose(const TruncatedSeries& outer, const TruncatedSeries& inner);

/// Composition with a closed-form fractional-linear outer function via one
/// series division, O(N^2). This is the per-generation workhorse.
TruncatedSeries compose_fractional_linear(const FractionalLinear& outer,
                                          const TruncatedSeries& inner);

/// G.f. of the sum of x independent copies; power(f, 0) is the constant 1.
TruncatedSeries power(const TruncatedSeries& f, long long x);

/// G.f. of the sum of two independent variables (coefficient convolution).
TruncatedSeries multiply(const TruncatedSeries& f, const TruncatedSeries& g);

/// f(c*s): coefficient k scaled by c^k. Requires c in [0, 1].
TruncatedSeries scale_argument(const TruncatedSeries& f, double c);

/// k-th factorial moment from the coefficients: sum_j j(j-1)...(j-k+1) f[j].
double factorial_moment(const TruncatedSeries& f, int k);

TruncatedSeries lf_gf(const LinearFractionalParams& p, int order);

/// h_a o h_b = h_{ab}; both operands must carry the same nu.
LinearFractionalParams lf_compose(const LinearFractionalParams& p,
                                  const LinearFractionalParams& q);

/// Formal power series log of a g.f. with f[0] > 0, coefficients in s.
std::vector<double> series_log(const TruncatedSeries& f);

/// Formal power series exp of a coefficient vector in s (no validation).
std::vector<double> series_exp_coeffs(std::span<const double> c, int order);

/// Formal power series exp of a coefficient vector in s; the result must be
/// a valid (sub)probability series or construction throws. Intended for
/// log-p.g.f. inputs.
TruncatedSeries series_exp(std::span<const double> c, int order);

/// Ratio num/den of two g.f.s as a formal series, validated as a pmf series.
/// Requires den[0] > 0.
TruncatedSeries divide_gf(const TruncatedSeries& num, const TruncatedSeries& den);

}  // namespace bpve
