#include "bpve/limit_process.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpve {

namespace {

double binomial(int n, int k) {
    double acc = 1.0;
    for (int i = 1; i <= k; ++i) acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    return acc;
}

}  // namespace

double LimitSpec::beta_rate() const {
    double acc = 0.0;
    double sign = 1.0;
    for (double l : lambdas) {
        acc += sign * l;
        sign = -sign;
    }
    return acc;
}

std::vector<double> LimitSpec::immigration_batch_pmf() const {
    if (lambdas.empty()) throw std::logic_error("no immigration in limit spec");
    const double beta = beta_rate();
    if (beta <= 0.0) throw std::domain_error("immigration rate beta must be > 0");
    const int kappa = static_cast<int>(lambdas.size());
    std::vector<double> pmf(static_cast<std::size_t>(kappa) + 1, 0.0);
    // h(s) = 1 + beta^{-1} sum_k lambda_k (s-1)^k expanded in powers of s.
    pmf[0] = 1.0;
    for (int k = 1; k <= kappa; ++k) {
        const double lk = lambdas[static_cast<std::size_t>(k - 1)] / beta;
        for (int j = 0; j <= k; ++j) {
            const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
            pmf[static_cast<std::size_t>(j)] += lk * sign * binomial(k, j);
        }
    }
    double sum = 0.0;
    for (double& v : pmf) {
        if (v < -1e-9) throw std::domain_error("lambda vector gives an invalid batch pmf");
        if (v < 0.0) v = 0.0;
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9 || pmf[0] > 1e-9)
        throw std::domain_error("lambda vector gives an invalid batch pmf");
    pmf[0] = 0.0;
    return pmf;
}

LimitSpec LimitSpec::from_environment(const EnvironmentSpec& env) {
    LimitSpec out;
    out.nu = env.nu;
    int maxk = 0;
    for (const auto& atom : env.immigration) maxk = std::max(maxk, atom.value);
    if (maxk > 0) {
        out.lambdas.assign(static_cast<std::size_t>(maxk), 0.0);
        // lambda_j = sum_k c_k * C(k, j).
        for (const auto& atom : env.immigration)
            for (int j = 1; j <= atom.value; ++j)
                out.lambdas[static_cast<std::size_t>(j - 1)] +=
                    atom.weight * binomial(atom.value, j);
    }
    return out;
}

void LimitSpec::validate(int order) const {
    if (nu < 0.0) throw std::domain_error("nu must be >= 0");
    if (!lambdas.empty()) {
        immigration_batch_pmf();
        stationary_f_y(*this, order);
    }
}

long long Trajectory::state_at(double t) const {
    if (t < t0) throw std::invalid_argument("query before trajectory start");
    long long state = initial_state;
    for (std::size_t i = 0; i < event_times.size(); ++i) {
        if (event_times[i] > t) break;
        state = states[i];
    }
    return state;
}

double bd_transition_gf(const LimitSpec& spec, double s, double t) {
    if (s < 0.0 || s > 1.0) throw std::domain_error("s outside [0,1]");
    if (t < 0.0) throw std::domain_error("negative time");
    return spec.h(std::exp(-t))(s);
}

TruncatedSeries conditioned_kernel(const LimitSpec& spec, double u, double t, long long x0,
                                   int order) {
    if (!(0.0 < u && u < t && t <= 1.0)) throw std::invalid_argument("need 0 < u < t <= 1");
    if (x0 < 1) throw std::invalid_argument("x0 must be >= 1");
    const TruncatedSeries base = spec.h(u / t).to_series(order);
    const double ht0 = spec.h(t)(0.0);
    const double hu0 = spec.h(u)(0.0);
    const TruncatedSeries lead = power(base, x0);
    const TruncatedSeries sub = power(scale_argument(base, ht0), x0);
    const double denom = 1.0 - std::pow(hu0, static_cast<double>(x0));
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    for (int k = 0; k <= order; ++k)
        c[static_cast<std::size_t>(k)] = (lead.coeff(k) - sub.coeff(k)) / denom;
    return TruncatedSeries(std::move(c));
}

TruncatedSeries entrance_law(const LimitSpec& spec, double t, int order) {
    if (!(0.0 < t && t <= 1.0)) throw std::domain_error("entrance law needs t in (0,1]");
    const double p = spec.p(), q = spec.q();
    const double ht0 = spec.h(t)(0.0);
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    double geo = p;  // p q^{x-1}
    double hx = 1.0;
    for (int x = 1; x <= order; ++x) {
        hx *= ht0;
        c[static_cast<std::size_t>(x)] = geo * (1.0 - hx) / t;
        geo *= q;
    }
    return TruncatedSeries(std::move(c));
}

TruncatedSeries quasi_stationary_pmf(const LimitSpec& spec, int order) {
    const double p = spec.p(), q = spec.q();
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    double geo = p;
    for (int x = 1; x <= order; ++x) {
        c[static_cast<std::size_t>(x)] = geo;
        geo *= q;
    }
    return TruncatedSeries(std::move(c));
}

double survival_from_geom(const LimitSpec& spec, double eps) {
    if (!(0.0 < eps && eps <= 1.0)) throw std::domain_error("eps outside (0,1]");
    const double p = spec.p(), q = spec.q();
    const double he0 = spec.h(eps)(0.0);
    double acc = 0.0;
    double geo = p, hx = 1.0;
    for (int x = 1; x <= 100000; ++x) {
        hx *= he0;
        const double term = geo * (1.0 - hx);
        acc += term;
        geo *= q;
        if (geo < 1e-18) break;
    }
    return acc;
}

Trajectory simulate_z(const LimitSpec& spec, long long init_state, double t0, double t1,
                      RandomStream& stream) {
    if (t1 < t0) throw std::invalid_argument("t1 < t0");
    Trajectory out;
    out.t0 = t0;
    out.t1 = t1;
    out.initial_state = init_state;
    long long x = init_state;
    double t = t0;
    const double event_rate = 1.0 + spec.nu;
    const double birth_prob = spec.split_prob();
    while (x > 0) {
        t += stream.exponential(static_cast<double>(x) * event_rate);
        if (t > t1) break;
        const bool split = stream.uniform() < birth_prob;
        x += split ? 1 : -1;
        out.event_times.push_back(t);
        out.states.push_back(x);
        out.kinds.push_back(split ? EventKind::split : EventKind::death);
    }
    return out;
}

ConditionedUSample sample_u_conditioned(const LimitSpec& spec, double eps,
                                        std::span<const double> grid, RandomStream& stream) {
    if (!(0.0 < eps && eps <= 1.0)) throw std::domain_error("eps outside (0,1]");
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < eps)
        throw std::invalid_argument("grid must be sorted within [eps, inf)");
    ConditionedUSample out;
    out.sample.times.assign(grid.begin(), grid.end());
    out.sample.states.assign(grid.size(), 0);
    out.sample.conditioned = true;

    // Geom(p) initial state.
    const long long init = 1 + stream.geometric0(spec.q());
    const double horizon = std::max(0.0, std::log(grid.back())) + 1e-12;
    const Trajectory traj = simulate_z(spec, init, std::log(eps), horizon, stream);
    if (traj.state_at(0.0) == 0) return out;  // rejected: extinct by t = 1
    out.accepted = true;
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.sample.states[i] = traj.state_at(std::log(grid[i]));
    return out;
}

TruncatedSeries stationary_f_y(const LimitSpec& spec, int order) {
    if (spec.lambdas.empty()) throw std::logic_error("no immigration in limit spec");
    const int kappa = static_cast<int>(spec.lambdas.size());
    std::vector<double> logf(static_cast<std::size_t>(order) + 1, 0.0);
    if (spec.nu == 0.0) {
        // log f_Y = sum_k lambda_k (s-1)^k / k.
        for (int k = 1; k <= kappa; ++k) {
            const double lk = spec.lambdas[static_cast<std::size_t>(k - 1)] / k;
            for (int j = 0; j <= std::min(k, order); ++j) {
                const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
                logf[static_cast<std::size_t>(j)] += lk * sign * binomial(k, j);
            }
        }
    } else {
        // log f_Y = -sum_k (2^k lambda_k / nu^k) [ log(1 + w(1-s))
        //           + sum_{i<k} (nu^i/(i 2^i)) (s-1)^i ],  w = nu/2.
        // log(1 + w(1-s)) = log(1+w) - sum_m (q^m/m) s^m with q = w/(1+w).
        const double w = spec.nu / 2.0;
        const double q = w / (1.0 + w);
        for (int k = 1; k <= kappa; ++k) {
            const double tk = spec.lambdas[static_cast<std::size_t>(k - 1)] / std::pow(w, k);
            logf[0] -= tk * std::log1p(w);
            double qm = 1.0;
            for (int m = 1; m <= order; ++m) {
                qm *= q;
                logf[static_cast<std::size_t>(m)] += tk * qm / m;
            }
            double wi = 1.0;
            for (int i = 1; i < k; ++i) {
                wi *= w;
                const double coef = tk * wi / i;
                for (int j = 0; j <= std::min(i, order); ++j) {
                    const double sign = ((i - j) % 2 == 0) ? 1.0 : -1.0;
                    logf[static_cast<std::size_t>(j)] -= coef * sign * binomial(i, j);
                }
            }
        }
    }
    return series_exp(logf, order);
}

double w_transition_gf(const LimitSpec& spec, long long y, double s, double t) {
    if (y < 0) throw std::invalid_argument("y must be >= 0");
    if (s < 0.0 || s > 1.0) throw std::domain_error("s outside [0,1]");
    if (t < 0.0) throw std::domain_error("negative time");
    const int order = 256;
    const TruncatedSeries fy = stationary_f_y(spec, order);
    const double hs = spec.h(std::exp(-t))(s);
    return fy.evaluate(s) / fy.evaluate(hs) * std::pow(hs, static_cast<double>(y));
}

TruncatedSeries w_transition_kernel(const LimitSpec& spec, long long y, double t, int order) {
    const TruncatedSeries fy = stationary_f_y(spec, order);
    const TruncatedSeries base = spec.h(std::exp(-t)).to_series(order);
    const TruncatedSeries ratio = divide_gf(fy, compose(fy, base));
    if (y == 0) return ratio;
    return multiply(ratio, power(base, y));
}

Trajectory simulate_w(const LimitSpec& spec, long long init_state, double t0, double t1,
                      RandomStream& stream) {
    if (t1 < t0) throw std::invalid_argument("t1 < t0");
    Trajectory out;
    out.t0 = t0;
    out.t1 = t1;
    out.initial_state = init_state;
    const double beta = spec.lambdas.empty() ? 0.0 : spec.beta_rate();
    std::vector<double> batch_cdf;
    if (beta > 0.0) {
        batch_cdf = spec.immigration_batch_pmf();
        for (std::size_t i = 1; i < batch_cdf.size(); ++i) batch_cdf[i] += batch_cdf[i - 1];
    }
    const double indiv_rate = 1.0 + spec.nu;
    const double split_prob = spec.split_prob();
    long long x = init_state;
    double t = t0;
    while (true) {
        const double total = static_cast<double>(x) * indiv_rate + beta;
        if (total <= 0.0) break;
        t += stream.exponential(total);
        if (t > t1) break;
        const double u = stream.uniform() * total;
        if (u < beta) {
            // Immigration batch from h.
            const double v = stream.uniform();
            long long batch = static_cast<long long>(batch_cdf.size()) - 1;
            for (std::size_t k = 1; k < batch_cdf.size(); ++k) {
                if (v < batch_cdf[k]) {
                    batch = static_cast<long long>(k);
                    break;
                }
            }
            x += batch;
            out.kinds.push_back(EventKind::immigration);
        } else {
            const bool split = stream.uniform() < split_prob;
            x += split ? 1 : -1;
            out.kinds.push_back(split ? EventKind::split : EventKind::death);
        }
        out.event_times.push_back(t);
        out.states.push_back(x);
    }
    return out;
}

PathSample reverse_marginals(const PathSample& forward) {
    // The grid must equal its own image under t -> 1/t so that reversed and
    // forward marginals line up point by point.
    for (double t : forward.times) {
        const double inv = 1.0 / t;
        bool member = false;
        for (double v : forward.times)
            if (std::abs(v - inv) < 1e-12 * std::max(1.0, inv)) {
                member = true;
                break;
            }
        if (!member) throw std::invalid_argument("grid not closed under inversion");
    }
    PathSample out;
    out.n = forward.n;
    out.conditioned = forward.conditioned;
    out.overflow = forward.overflow;
    out.times.reserve(forward.times.size());
    out.states.assign(forward.states.size(), 0);
    for (std::size_t i = forward.times.size(); i-- > 0;)
        out.times.push_back(1.0 / forward.times[i]);
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        const double target = 1.0 / out.times[i];
        for (std::size_t j = 0; j < forward.times.size(); ++j) {
            if (std::abs(forward.times[j] - target) < 1e-12 * std::max(1.0, target)) {
                out.states[i] = forward.states[j];
                break;
            }
        }
    }
    return out;
}

std::vector<PathSample> reverse_marginals(const std::vector<PathSample>& forward) {
    std::vector<PathSample> out;
    out.reserve(forward.size());
    for (const auto& p : forward) out.push_back(reverse_marginals(p));
    return out;
}

}  // namespace bpve
