#pragma once

#include <vector>

#include "bpve/discrete_sim.hpp"
#include "bpve/environment.hpp"
#include "bpve/rng.hpp"
#include "bpve/truncated_series.hpp"

namespace bpve {

/// Parameters of the limiting processes: the birth-and-death process Z (birth
/// rate nu/2, death rate 1 + nu/2), its time change U(t) = Z(log t), and the
/// continuous-time branching process with immigration W.
struct LimitSpec {
    double nu = 0.0;
    std::vector<double> lambdas;  // lambda_1..lambda_kappa; empty = no immigration

    double p() const { return 2.0 / (2.0 + nu); }
    double q() const { return nu / (2.0 + nu); }
    double alpha_rate() const { return 1.0 + nu; }
    double beta_rate() const;                      // sum (-1)^{k+1} lambda_k
    double split_prob() const { return (nu / 2.0) / (1.0 + nu); }
    bool has_immigration() const { return !lambdas.empty(); }

    /// Immigration batch pmf from h(s) = 1 + beta^{-1} sum lambda_k (s-1)^k;
    /// index k >= 1 (no zero batches). Throws if not a valid pmf.
    std::vector<double> immigration_batch_pmf() const;

    /// h_a for this nu.
    FractionalLinear h(double a) const { return LinearFractionalParams{a, nu}.fractional_linear(); }

    static LimitSpec from_environment(const EnvironmentSpec& spec);

    void validate(int order) const;
};

enum class EventKind : unsigned char { death, split, immigration };

/// Event path of Z or W on [t0, t1].
struct Trajectory {
    double t0 = 0.0;
    double t1 = 0.0;
    long long initial_state = 0;
    std::vector<double> event_times;
    std::vector<long long> states;  // state after each event
    std::vector<EventKind> kinds;

    long long state_at(double t) const;
};

/// F(s,t) = E[s^{Z(t+u)} | Z(u)=1] = h_{e^{-t}}(s).
double bd_transition_gf(const LimitSpec& spec, double s, double t);

/// Transition pmf of U conditioned on U(1) > 0, from x0 at time u to time t.
TruncatedSeries conditioned_kernel(const LimitSpec& spec, double u, double t, long long x0,
                                   int order);

/// Entrance law g_t: g_t[x] = p q^{x-1} t^{-1} (1 - h_t(0)^x), x >= 1.
TruncatedSeries entrance_law(const LimitSpec& spec, double t, int order);

/// Geom(p), the extremal quasi-stationary law of Z.
TruncatedSeries quasi_stationary_pmf(const LimitSpec& spec, int order);

/// P_eps(U(1) > 0) summed from the Geom(p) initial law; equals eps.
double survival_from_geom(const LimitSpec& spec, double eps);

/// Exact event-driven simulation of Z from init_state at time t0 until t1.
Trajectory simulate_z(const LimitSpec& spec, long long init_state, double t0, double t1,
                      RandomStream& stream);

/// One rejection attempt at sampling L((Z(log t))_t | Z(0) > 0) with
/// Z(log eps) ~ Geom(p): draws the initial state, runs Z, accepts when
/// Z(0) > 0. Grid times must be sorted, within [eps, inf), and contain 1.
struct ConditionedUSample {
    PathSample sample;
    bool accepted = false;
};
ConditionedUSample sample_u_conditioned(const LimitSpec& spec, double eps,
                                        std::span<const double> grid, RandomStream& stream);

/// Stationary law f_Y of W, by series exp of the closed-form log f_Y.
TruncatedSeries stationary_f_y(const LimitSpec& spec, int order);

/// G_y(s,t) = f_Y(s)/f_Y(h_{e^{-t}}(s)) * (h_{e^{-t}}(s))^y at a scalar s.
double w_transition_gf(const LimitSpec& spec, long long y, double s, double t);

/// Same transition law as a pmf series (for joint-law computations).
TruncatedSeries w_transition_kernel(const LimitSpec& spec, long long y, double t, int order);

/// Exact event-driven simulation of W (individual events at rate x(1+nu),
/// immigration batches at rate beta).
Trajectory simulate_w(const LimitSpec& spec, long long init_state, double t0, double t1,
                      RandomStream& stream);

/// Re-indexes samples on an inversion-closed grid by t -> 1/t, producing
/// marginal samples of the time-reversed processes.
std::vector<PathSample> reverse_marginals(const std::vector<PathSample>& forward);
PathSample reverse_marginals(const PathSample& forward);

}  // namespace bpve
