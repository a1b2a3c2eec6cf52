#include "bpve/exact_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpve {

namespace {

// Evaluates the immigration g.f. at a scalar, exactly.
double immigration_eval(const EnvironmentSpec& spec, long long n, double s) {
    const double scale = 1.0 - spec.mean_at(n);
    double acc = 0.0, mass = 0.0;
    for (const auto& atom : spec.immigration) {
        acc += atom.weight * scale * std::pow(s, atom.value);
        mass += atom.weight * scale;
    }
    return 1.0 - mass + acc;
}

// h_l(f(s)) for the low-degree immigration polynomial h_l, in series arithmetic.
TruncatedSeries immigration_of(const EnvironmentSpec& spec, long long n,
                               const TruncatedSeries& f) {
    const double scale = 1.0 - spec.mean_at(n);
    const int order = f.order();
    int maxk = 0;
    for (const auto& atom : spec.immigration) maxk = std::max(maxk, atom.value);
    std::vector<double> weight(static_cast<std::size_t>(maxk) + 1, 0.0);
    double mass = 0.0;
    for (const auto& atom : spec.immigration) {
        weight[static_cast<std::size_t>(atom.value)] += atom.weight * scale;
        mass += atom.weight * scale;
    }
    // Horner in f over the short polynomial.
    std::vector<double> acc(static_cast<std::size_t>(order) + 1, 0.0);
    acc[0] = maxk >= 0 ? weight[static_cast<std::size_t>(maxk)] : 0.0;
    const std::vector<double> base(f.coeffs().begin(), f.coeffs().end());
    for (int k = maxk; k-- > 0;) {
        std::vector<double> next(static_cast<std::size_t>(order) + 1, 0.0);
        for (int i = 0; i <= order; ++i) {
            const double ai = acc[static_cast<std::size_t>(i)];
            if (ai == 0.0) continue;
            for (int j = 0; i + j <= order; ++j)
                next[static_cast<std::size_t>(i + j)] += ai * base[static_cast<std::size_t>(j)];
        }
        next[0] += weight[static_cast<std::size_t>(k)];
        acc = std::move(next);
    }
    acc[0] += 1.0 - mass;
    return TruncatedSeries(std::move(acc));
}

}  // namespace

CompositionChain::CompositionChain(const EnvironmentSpec& spec,
                                   std::vector<long long> checkpoints, int order,
                                   bool with_immigration)
    : spec_(spec), order_(order), checkpoints_(std::move(checkpoints)),
      with_immigration_(with_immigration) {
    if (checkpoints_.empty()) throw std::invalid_argument("no checkpoints");
    std::sort(checkpoints_.begin(), checkpoints_.end());
    checkpoints_.erase(std::unique(checkpoints_.begin(), checkpoints_.end()), checkpoints_.end());
    if (checkpoints_.front() != 0) checkpoints_.insert(checkpoints_.begin(), 0);
    if (checkpoints_.front() < 0) throw std::invalid_argument("negative checkpoint");
    if (checkpoints_.back() > 1'000'000)
        throw std::invalid_argument("chain horizon above the 1e6 generation cap");
    if (with_immigration_ && !spec_.has_immigration())
        throw std::logic_error("immigration chain requested without immigration");

    const long long last = checkpoints_.back();
    const TruncatedSeries identity = TruncatedSeries::point_mass(1, order_);
    const TruncatedSeries one = TruncatedSeries::point_mass(0, order_);

    // Backward sweep: maintain f_{k, g_next} (and the immigration product)
    // inside the current segment, emitting a segment series at each
    // checkpoint boundary.
    std::size_t seg = checkpoints_.size() - 1;
    TruncatedSeries f_cur = identity;
    TruncatedSeries g_cur = one;
    segments_x_.assign(checkpoints_.size() - 1, identity);
    if (with_immigration_) segments_y_.assign(checkpoints_.size() - 1, one);
    for (long long k = last; k >= 1; --k) {
        if (with_immigration_) {
            g_cur = multiply(g_cur, immigration_of(spec_, k, f_cur));
        }
        f_cur = compose_fractional_linear(spec_.offspring_params(k), f_cur);
        if (seg > 0 && k - 1 == checkpoints_[seg - 1]) {
            segments_x_[seg - 1] = f_cur;
            if (with_immigration_) segments_y_[seg - 1] = g_cur;
            f_cur = identity;
            g_cur = one;
            --seg;
        }
    }

    // Checkpoint marginals by stitching segments: f_{0,g_{i+1}} = f_{0,g_i} o f_{g_i,g_{i+1}},
    // g_{0,g_{i+1}} = g_{0,g_i}(f_{g_i,g_{i+1}}) * g_{g_i,g_{i+1}}.
    marginals_x_.reserve(checkpoints_.size());
    marginals_x_.push_back(identity);
    if (with_immigration_) {
        marginals_y_.reserve(checkpoints_.size());
        marginals_y_.push_back(one);
    }
    for (std::size_t i = 0; i + 1 < checkpoints_.size(); ++i) {
        marginals_x_.push_back(compose(marginals_x_[i], segments_x_[i]));
        if (with_immigration_)
            marginals_y_.push_back(multiply(compose(marginals_y_[i], segments_x_[i]),
                                            segments_y_[i]));
    }

    // Extinction probabilities toward the last checkpoint by the exact scalar
    // recursion z_{k-1} = f_k(z_k), z_last = 0.
    extinct_.assign(checkpoints_.size(), 0.0);
    double z = 0.0;
    std::size_t ci = checkpoints_.size() - 1;
    extinct_[ci] = 0.0;
    for (long long k = last; k >= 1; --k) {
        z = spec_.offspring_params(k)(z);
        if (ci > 0 && k - 1 == checkpoints_[ci - 1]) extinct_[--ci] = z;
    }
}

const TruncatedSeries& CompositionChain::segment_y(std::size_t i) const {
    if (!with_immigration_) throw std::logic_error("chain built without immigration");
    return segments_y_[i];
}

const TruncatedSeries& CompositionChain::marginal_y(std::size_t i) const {
    if (!with_immigration_) throw std::logic_error("chain built without immigration");
    return marginals_y_[i];
}

TruncatedSeries marginal_pmf_x(const EnvironmentSpec& spec, long long n, int order) {
    if (n < 0) throw std::invalid_argument("n must be >= 0");
    CompositionChain chain(spec, {n}, order);
    return chain.marginal_x(chain.checkpoints().size() - 1);
}

double survival_probability(const EnvironmentSpec& spec, long long n, int order) {
    return 1.0 - marginal_pmf_x(spec, n, order).coeff(0);
}

TruncatedSeries conditional_pmf_survival(const EnvironmentSpec& spec, long long n, int order) {
    const TruncatedSeries marg = marginal_pmf_x(spec, n, order);
    const double surv = 1.0 - marg.coeff(0);
    if (surv <= 0.0) throw std::domain_error("extinction certain at this horizon");
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    for (int k = 1; k <= order; ++k) c[static_cast<std::size_t>(k)] = marg.coeff(k) / surv;
    return TruncatedSeries(std::move(c));
}

TruncatedSeries transition_pmf_x(const EnvironmentSpec& spec, long long j, long long n,
                                 long long x, int order) {
    if (j > n) throw std::invalid_argument("transition requires j <= n");
    if (x < 1) throw std::invalid_argument("transition requires x >= 1");
    if (j == n) return TruncatedSeries::point_mass(static_cast<int>(std::min<long long>(x, order)), order);
    CompositionChain chain(spec, {j, n}, order);
    return power(chain.segment_x(chain.segment_count() - 1), x);
}

TruncatedSeries marginal_pmf_y(const EnvironmentSpec& spec, long long n, int order) {
    if (!spec.has_immigration()) return TruncatedSeries::point_mass(0, order);
    if (n == 0) return TruncatedSeries::point_mass(0, order);
    CompositionChain chain(spec, {n}, order, true);
    return chain.marginal_y(chain.checkpoints().size() - 1);
}

TruncatedSeries transition_pmf_y(const EnvironmentSpec& spec, long long j, long long n,
                                 long long y, int order) {
    if (j > n) throw std::invalid_argument("transition requires j <= n");
    if (y < 0) throw std::invalid_argument("transition requires y >= 0");
    if (j == n) return TruncatedSeries::point_mass(static_cast<int>(std::min<long long>(y, order)), order);
    CompositionChain chain(spec, {j, n}, order, true);
    const std::size_t seg = chain.segment_count() - 1;
    if (y == 0) return chain.segment_y(seg);
    return multiply(chain.segment_y(seg), power(chain.segment_x(seg), y));
}

double conditional_mean_x(const EnvironmentSpec& spec, long long j, long long n, int order) {
    if (j > n) throw std::invalid_argument("conditional mean requires j <= n");
    if (j == 0 && n == 0) return 1.0;
    const double surv = survival_probability(spec, j, order);
    if (surv <= 0.0) throw std::domain_error("extinction certain at conditioning time");
    return cumulative_mean(spec, 0, n) / surv;
}

}  // namespace bpve
