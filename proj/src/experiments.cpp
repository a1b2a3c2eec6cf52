#include "bpve/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "bpve/discrete_sim.hpp"
#include "bpve/environment.hpp"
#include "bpve/errors.hpp"
#include "bpve/exact_engine.hpp"
#include "bpve/limit_process.hpp"
#include "bpve/parallel.hpp"

namespace bpve {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kJointCap = 64;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    double lap() {
        const double s = seconds();
        start_ = std::chrono::steady_clock::now();
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string time_tag(double t) {
    std::string s = fmt(t);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

CheckRecord exact_check(std::string name, double value, double tolerance, double runtime,
                        std::string detail = {}, double tail = 0.0) {
    CheckRecord rec;
    rec.name = std::move(name);
    rec.value = value;
    rec.tolerance = tolerance;
    rec.tail_mass = tail;
    rec.passed = value <= tolerance;
    rec.runtime_s = runtime;
    rec.detail = std::move(detail);
    return rec;
}

CheckRecord mc_check(std::string name, double value, double tolerance, double radius,
                     long long samples, double runtime, std::string detail = {},
                     double tail = 0.0) {
    if (tolerance < radius)
        throw ConfigError("check '" + name + "': tolerance " + fmt(tolerance) +
                          " below the confidence radius " + fmt(radius) +
                          "; increase replicates or loosen the budget");
    CheckRecord rec;
    rec.name = std::move(name);
    rec.value = value;
    rec.tolerance = tolerance;
    rec.confidence_radius = radius;
    rec.tail_mass = tail;
    rec.samples = samples;
    rec.passed = value <= tolerance;
    rec.runtime_s = runtime;
    rec.detail = std::move(detail);
    return rec;
}

// Conditional pmf given positivity, from a marginal series.
TruncatedSeries condition_on_positive(const TruncatedSeries& marg) {
    const double surv = 1.0 - marg.coeff(0);
    if (surv <= 0.0) throw std::domain_error("extinction certain");
    std::vector<double> c(static_cast<std::size_t>(marg.order()) + 1, 0.0);
    for (int k = 1; k <= marg.order(); ++k) c[static_cast<std::size_t>(k)] = marg.coeff(k) / surv;
    return TruncatedSeries(std::move(c));
}

double survival_scalar(const EnvironmentSpec& spec, long long gen) {
    double z = 0.0;
    for (long long k = gen; k >= 1; --k) z = spec.offspring_params(k)(z);
    return 1.0 - z;
}

// Marginal law of the conditioned limit at time t: the entrance law on (0,1],
// the quasi-stationary geometric pushed through h_{1/t} past 1.
TruncatedSeries conditioned_limit_marginal(const LimitSpec& limit, double t, int order) {
    if (t <= 1.0) return entrance_law(limit, t, order);
    return compose(quasi_stationary_pmf(limit, order), limit.h(1.0 / t).to_series(order));
}

// Tuple clip used for joint laws: once a coordinate escapes above the cap,
// the rest of the tuple is forced to the escape symbol, matching the exact
// walker in joint_pmf_from_kernels.
std::vector<long long> sticky_clip(std::span<const long long> states, int cap) {
    std::vector<long long> out(states.begin(), states.end());
    bool escaped = false;
    for (long long& s : out) {
        if (escaped || s > cap) {
            escaped = true;
            s = cap + 1;
        }
    }
    return out;
}

std::vector<ReportWriter::PmfRow> pmf_rows(int cap, const TruncatedSeries* exact,
                                           const TruncatedSeries* limit,
                                           const EmpiricalDistribution* mc) {
    std::vector<ReportWriter::PmfRow> rows;
    rows.reserve(static_cast<std::size_t>(cap) + 1);
    std::vector<double> freq;
    double tail = 0.0;
    if (mc) std::tie(freq, tail) = mc->pmf(cap);
    for (int s = 0; s <= cap; ++s) {
        ReportWriter::PmfRow row;
        row.state = s;
        if (exact) row.exact = exact->coeff(s);
        if (limit) row.limit = limit->coeff(s);
        if (mc) {
            const double p = freq[static_cast<std::size_t>(s)];
            row.mc = p;
            row.mc_ci_radius =
                2.58 * std::sqrt(p * (1.0 - p) / static_cast<double>(mc->total()));
        }
        rows.push_back(row);
    }
    return rows;
}

struct MarginalAcc {
    std::vector<EmpiricalDistribution> at;
    JointEmpirical joint;
    long long overflowed = 0;

    void init(std::size_t times, int dims, int cap) {
        at.assign(times, {});
        joint = JointEmpirical(dims, cap);
    }
    void merge_from(const MarginalAcc& o) {
        if (at.size() < o.at.size()) at.resize(o.at.size());
        for (std::size_t i = 0; i < o.at.size(); ++i) at[i].merge_from(o.at[i]);
        joint.merge_from(o.joint);
        overflowed += o.overflowed;
    }
};

}  // namespace

bool VerificationReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

ReportWriter::ReportWriter(std::filesystem::path dir, std::string format)
    : dir_(std::move(dir)), format_(std::move(format)) {
    if (format_ != "json" && format_ != "csv")
        throw ConfigError("unknown report format '" + format_ + "' (use csv or json)");
    std::filesystem::create_directories(dir_);
}

void ReportWriter::write_pmf(const std::string& check, const std::vector<PmfRow>& rows) const {
    std::ofstream out(dir_ / ("pmf_" + check + ".csv"), std::ios::trunc);
    out << "state,exact,limit,mc,mc_ci_radius\n";
    for (const auto& row : rows) {
        out << row.state << ',';
        if (row.exact) out << fmt(*row.exact);
        out << ',';
        if (row.limit) out << fmt(*row.limit);
        out << ',';
        if (row.mc) out << fmt(*row.mc);
        out << ',';
        if (row.mc_ci_radius) out << fmt(*row.mc_ci_radius);
        out << '\n';
    }
}

void ReportWriter::write_diagnostics(
    const std::vector<std::pair<std::string, double>>& rows) const {
    std::ofstream out(dir_ / "diagnostics.csv", std::ios::trunc);
    out << "name,value\n";
    for (const auto& [name, value] : rows) out << name << ',' << fmt(value) << '\n';
}

void ReportWriter::write_reports(const std::vector<VerificationReport>& reports) const {
    if (format_ == "json") {
        nlohmann::ordered_json doc;
        doc["version"] = kVersion;
        if (!reports.empty()) {
            doc["scenario"] = reports.front().scenario;
            doc["seed"] = reports.front().seed;
            doc["config_hash"] = reports.front().config_digest;
        }
        bool all = true;
        nlohmann::ordered_json exps = nlohmann::ordered_json::array();
        for (const auto& rep : reports) {
            nlohmann::ordered_json e;
            e["experiment"] = rep.experiment;
            e["passed"] = rep.all_passed();
            all = all && rep.all_passed();
            nlohmann::ordered_json checks = nlohmann::ordered_json::array();
            for (const auto& c : rep.checks) {
                nlohmann::ordered_json j;
                j["name"] = c.name;
                j["value"] = c.value;
                j["tolerance"] = c.tolerance;
                j["confidence_radius"] = c.confidence_radius;
                j["tail_mass"] = c.tail_mass;
                j["samples"] = c.samples;
                j["passed"] = c.passed;
                j["runtime_s"] = c.runtime_s;
                if (!c.detail.empty()) j["detail"] = c.detail;
                checks.push_back(j);
            }
            e["checks"] = checks;
            exps.push_back(e);
        }
        doc["experiments"] = exps;
        doc["all_passed"] = all;
        std::ofstream out(dir_ / "report.json", std::ios::trunc);
        out << doc.dump(2) << '\n';
    } else {
        std::ofstream out(dir_ / "report.csv", std::ios::trunc);
        out << "experiment,check,value,tolerance,confidence_radius,tail_mass,samples,passed\n";
        for (const auto& rep : reports)
            for (const auto& c : rep.checks)
                out << rep.experiment << ',' << c.name << ',' << fmt(c.value) << ','
                    << fmt(c.tolerance) << ',' << fmt(c.confidence_radius) << ','
                    << fmt(c.tail_mass) << ',' << c.samples << ',' << (c.passed ? 1 : 0) << '\n';
    }
}

void print_report(const VerificationReport& report) {
    for (const auto& c : report.checks) {
        std::printf("[%s] %s/%s value=%s tol=%s", c.passed ? "PASS" : "FAIL",
                    report.experiment.c_str(), c.name.c_str(), fmt(c.value).c_str(),
                    fmt(c.tolerance).c_str());
        if (c.samples > 0) std::printf(" radius=%s samples=%lld", fmt(c.confidence_radius).c_str(), c.samples);
        if (!c.detail.empty()) std::printf(" (%s)", c.detail.c_str());
        std::printf("\n");
    }
}

VerificationReport run_yaglom(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"yaglom", config.name, config.seed, config_hash(config), {}};
    const EnvironmentSpec& spec = config.environment;
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(spec);
    const auto geom = quasi_stationary_pmf(limit, N);

    Timer timer;
    ScalingTable table(spec);
    std::vector<long long> gens;
    for (long long n : config.n_values) gens.push_back(table.scaling_A(n));
    CompositionChain chain(spec, gens, N);

    // Conditioned marginal vs Geom(2/(2+nu)) per scale; the largest n is the
    // enforced budget, smaller ones are recorded for the trend.
    std::vector<double> tvs;
    for (std::size_t i = 0; i < config.n_values.size(); ++i) {
        const long long n = config.n_values[i];
        const long long gen = gens[i];
        std::size_t ci = 0;
        while (chain.checkpoints()[ci] != gen) ++ci;
        const auto cond = condition_on_positive(chain.marginal_x(ci));
        const double tv = total_variation(cond, geom);
        tvs.push_back(tv);
        const bool final_n = i + 1 == config.n_values.size();
        report.checks.push_back(exact_check(
            "tv_n" + std::to_string(n), tv, final_n ? config.tol.scale_tv : 1.0, timer.lap(),
            "A(n)=" + std::to_string(gen), cond.tail_mass()));
        if (out)
            out->write_pmf("yaglom_n" + std::to_string(n), pmf_rows(kJointCap, &cond, &geom, nullptr));
    }

    double worst_increase = 0.0;
    for (std::size_t i = 0; i + 1 < tvs.size(); ++i)
        worst_increase = std::max(worst_increase, tvs[i + 1] - (1.05 * tvs[i] + 1e-3));
    report.checks.push_back(
        exact_check("tv_monotone_decrease", std::max(0.0, worst_increase), 0.0, timer.lap()));

    // n P(X_{A(n)} > 0) vs p = 2/(2+nu).
    const long long n_max = config.n_values.back();
    const double surv = 1.0 - chain.marginal_x(chain.checkpoints().size() - 1).coeff(0);
    const double scaled = static_cast<double>(n_max) * surv;
    report.checks.push_back(exact_check(
        "survival_scaling", std::abs(scaled / limit.p() - 1.0), config.tol.survival_rel,
        timer.lap(), "n*P(surv)=" + fmt(scaled) + " target=" + fmt(limit.p())));

    // E[X_{A(n)} | X_{A(n eps)} > 0] vs ((2+nu)/2) * eps.
    const long long j_gen = table.scaling_A(
        std::max<long long>(1, static_cast<long long>(std::floor(config.eps * static_cast<double>(n_max)))));
    const double cond_mean =
        table.cumulative_mean(0, gens.back()) / survival_scalar(spec, j_gen);
    const double mean_target = (2.0 + spec.nu) / 2.0 * config.eps;
    report.checks.push_back(exact_check(
        "conditional_mean", std::abs(cond_mean / mean_target - 1.0), config.tol.mean_rel,
        timer.lap(), "E=" + fmt(cond_mean) + " target=" + fmt(mean_target)));
    return report;
}

VerificationReport run_entrance_law(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"entrance", config.name, config.seed, config_hash(config), {}};
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(config.environment);
    if (!(config.eps > 0.0 && config.eps < 1.0))
        throw ConfigError("entrance experiment needs eps in (0,1)");

    Timer timer;
    // Push g_eps through the conditioned kernels to each grid time in (eps,1],
    // plus a quarter ladder so intermediate times are always exercised.
    const auto g_eps = entrance_law(limit, config.eps, N);
    std::vector<double> targets;
    for (double t : config.time_grid)
        if (t > config.eps && t <= 1.0) targets.push_back(t);
    for (int k = 1; k <= 4; ++k) {
        const double t = config.eps + k * (1.0 - config.eps) / 4.0;
        bool present = false;
        for (double v : targets) present = present || std::abs(v - t) < 1e-12;
        if (!present) targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    for (double t : targets) {
        std::vector<double> acc(static_cast<std::size_t>(N) + 1, 0.0);
        for (int x = 1; x <= N; ++x) {
            const double w = g_eps.coeff(x);
            if (w < 1e-18) continue;
            const auto k = conditioned_kernel(limit, config.eps, t, x, N);
            for (int z = 0; z <= N; ++z) acc[static_cast<std::size_t>(z)] += w * k.coeff(z);
        }
        const TruncatedSeries pushed{std::move(acc)};
        const auto g_t = entrance_law(limit, t, N);
        const double tv = total_variation(pushed, g_t);
        report.checks.push_back(exact_check("propagation_t" + time_tag(t), tv, config.tol.exact,
                                            timer.lap(), "", pushed.tail_mass()));
        if (out) out->write_pmf("entrance_t" + time_tag(t), pmf_rows(kJointCap, &pushed, &g_t, nullptr));
    }

    // Survival identity over an eps ladder.
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double eps = static_cast<double>(i) / 10.0;
        worst = std::max(worst, std::abs(survival_from_geom(limit, eps) - eps));
    }
    report.checks.push_back(
        exact_check("survival_identity", worst, config.tol.identity, timer.lap()));
    return report;
}

VerificationReport run_theorem1_fdd(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"fdd", config.name, config.seed, config_hash(config), {}};
    const EnvironmentSpec& spec = config.environment;
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(spec);
    if (std::find(config.time_grid.begin(), config.time_grid.end(), 1.0) == config.time_grid.end())
        throw ConfigError("fdd experiment needs t = 1 on the grid");

    Timer timer;
    ScalingTable table(spec);
    ConditionedXSampler sampler(spec, table, config.mc_n, config.time_grid, N);
    const auto& grid = sampler.grid();

    // Joint over at most three grid times: first, 1, last.
    std::vector<std::size_t> joint_idx;
    {
        const auto one =
            std::find(config.time_grid.begin(), config.time_grid.end(), 1.0) - config.time_grid.begin();
        joint_idx.push_back(0);
        if (static_cast<std::size_t>(one) != 0 &&
            static_cast<std::size_t>(one) != config.time_grid.size() - 1)
            joint_idx.push_back(static_cast<std::size_t>(one));
        if (config.time_grid.size() > 1) joint_idx.push_back(config.time_grid.size() - 1);
    }
    const double chain_build_s = timer.lap();

    auto acc = parallel_replicates<MarginalAcc>(
        config.seed, config.replicates, config.workers,
        [&](long long idx, RandomStream& stream, MarginalAcc& a) {
            if (a.at.empty()) a.init(grid.times.size(), static_cast<int>(joint_idx.size()), kJointCap);
            const auto path = sampler.sample(stream);
            (void)idx;
            for (std::size_t i = 0; i < path.states.size(); ++i) a.at[i].add(path.states[i]);
            std::vector<long long> tuple;
            tuple.reserve(joint_idx.size());
            for (std::size_t i : joint_idx) tuple.push_back(path.states[i]);
            a.joint.add(sticky_clip(tuple, kJointCap));
        });
    const double mc_s = timer.lap();

    // Exact finite-n conditioned marginals (for the scale-error records and
    // the CSV tables): extinction probabilities toward A(n) by the scalar
    // recursion, then reweight/push the chain marginals.
    const long long cond_gen = table.scaling_A(config.mc_n);
    const auto& cps = sampler.chain().checkpoints();
    std::vector<double> z(cps.size(), 0.0);
    {
        std::size_t ci = std::find(cps.begin(), cps.end(), cond_gen) - cps.begin();
        double cur = 0.0;
        for (long long k = cond_gen; k >= 1; --k) {
            cur = spec.offspring_params(k)(cur);
            if (ci > 0 && k - 1 == cps[ci - 1]) z[--ci] = cur;
        }
    }
    const double surv_n = survival_scalar(spec, cond_gen);

    const double mc_radius = tv_confidence_radius(config.replicates, kJointCap);
    for (std::size_t g = 0; g < grid.times.size(); ++g) {
        const double t = grid.times[g];
        const long long gen = grid.generations[g];
        const std::size_t ci = std::find(cps.begin(), cps.end(), gen) - cps.begin();

        TruncatedSeries exact = [&] {
            if (gen <= cond_gen) {
                const auto& marg = sampler.chain().marginal_x(ci);
                std::vector<double> c(static_cast<std::size_t>(N) + 1, 0.0);
                for (int x = 1; x <= N; ++x)
                    c[static_cast<std::size_t>(x)] =
                        marg.coeff(x) * (1.0 - std::pow(z[ci], x)) / surv_n;
                return TruncatedSeries(std::move(c));
            }
            // Past the conditioning time: push the conditioned pmf at A(n)
            // through the remaining segments.
            const std::size_t cond_ci = std::find(cps.begin(), cps.end(), cond_gen) - cps.begin();
            TruncatedSeries cur =
                condition_on_positive(sampler.chain().marginal_x(cond_ci));
            for (std::size_t seg = cond_ci; seg < ci; ++seg)
                cur = compose(cur, sampler.chain().segment_x(seg));
            return cur;
        }();

        const auto lim = conditioned_limit_marginal(limit, t, N);
        const double tv_mc = total_variation(lim, acc.at[g]);
        const double tv_scale = total_variation(exact, lim);
        report.checks.push_back(mc_check("marginal_t" + time_tag(t), tv_mc, config.tol.mc_tv,
                                         mc_radius, acc.at[g].total(),
                                         g == 0 ? chain_build_s + mc_s : 0.0,
                                         "A(nt)=" + std::to_string(gen)));
        report.checks.push_back(exact_check("scale_error_t" + time_tag(t), tv_scale, 1.0,
                                            timer.lap(), "exact finite-n vs limit",
                                            exact.tail_mass()));
        if (out) out->write_pmf("fdd_t" + time_tag(t), pmf_rows(kJointCap, &exact, &lim, &acc.at[g]));
    }

    // Exact limit joint over the selected times.
    std::vector<double> jt;
    for (std::size_t i : joint_idx) jt.push_back(grid.times[i]);
    const auto initial = conditioned_limit_marginal(limit, jt.front(), N);
    std::vector<std::vector<TruncatedSeries>> kernels;
    for (std::size_t leg = 0; leg + 1 < jt.size(); ++leg) {
        const double u = jt[leg], t = jt[leg + 1];
        std::vector<TruncatedSeries> rows;
        rows.reserve(kJointCap + 1);
        rows.push_back(TruncatedSeries::point_mass(0, N));
        if (t <= 1.0) {
            for (int x = 1; x <= kJointCap; ++x)
                rows.push_back(conditioned_kernel(limit, u, t, x, N));
        } else {
            const auto base = limit.h(u / t).to_series(N);
            TruncatedSeries pw = TruncatedSeries::point_mass(0, N);
            for (int x = 1; x <= kJointCap; ++x) {
                pw = multiply(pw, base);
                rows.push_back(pw);
            }
        }
        kernels.push_back(std::move(rows));
    }
    const auto joint_exact = joint_pmf_from_kernels(initial, kernels, kJointCap);
    const double tv_joint = total_variation(joint_exact, acc.joint);
    report.checks.push_back(mc_check("joint", tv_joint, config.tol.mc_tv, mc_radius,
                                     acc.joint.total(), timer.lap(),
                                     std::to_string(jt.size()) + " time points"));
    return report;
}

VerificationReport run_theorem2(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"theorem2", config.name, config.seed, config_hash(config), {}};
    const EnvironmentSpec& spec = config.environment;
    if (!spec.has_immigration()) throw ConfigError("theorem2 requires an immigration law");
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(spec);
    limit.validate(N);
    const auto fy = stationary_f_y(limit, N);

    Timer timer;
    ScalingTable table(spec);

    // (a) Exact Y marginals vs f_Y along n_values.
    std::vector<long long> gens;
    for (long long n : config.n_values) gens.push_back(table.scaling_A(n));
    CompositionChain chain(spec, gens, N, true);
    for (std::size_t i = 0; i < config.n_values.size(); ++i) {
        const long long n = config.n_values[i];
        std::size_t ci = 0;
        while (chain.checkpoints()[ci] != gens[i]) ++ci;
        const auto marg = chain.marginal_y(ci);
        const double tv = total_variation(marg, fy);
        const bool final_n = i + 1 == config.n_values.size();
        report.checks.push_back(exact_check("y_marginal_tv_n" + std::to_string(n), tv,
                                            final_n ? config.tol.scale_tv : 1.0, timer.lap(),
                                            "A(n)=" + std::to_string(gens[i]), marg.tail_mass()));
        if (out)
            out->write_pmf("theorem2_n" + std::to_string(n), pmf_rows(kJointCap, &marg, &fy, nullptr));
    }

    // (b) Monte Carlo joint of (Y_{A(n t_i)}) vs the stationary limit joint.
    const SimGrid grid(table, config.mc_n, config.time_grid);
    std::vector<std::size_t> joint_idx;
    joint_idx.push_back(0);
    if (config.time_grid.size() > 2) joint_idx.push_back(config.time_grid.size() / 2);
    if (config.time_grid.size() > 1) joint_idx.push_back(config.time_grid.size() - 1);

    auto acc = parallel_replicates<MarginalAcc>(
        config.seed, config.replicates, config.workers,
        [&](long long, RandomStream& stream, MarginalAcc& a) {
            if (a.at.empty()) a.init(grid.times.size(), static_cast<int>(joint_idx.size()), kJointCap);
            const auto path = simulate_y(spec, grid, stream, config.population_cap);
            if (path.overflow) {
                ++a.overflowed;
                for (auto& d : a.at) d.add_overflow();
                std::vector<long long> esc(joint_idx.size(), kJointCap + 1);
                a.joint.add(esc);
                return;
            }
            for (std::size_t i = 0; i < path.states.size(); ++i) a.at[i].add(path.states[i]);
            std::vector<long long> tuple;
            tuple.reserve(joint_idx.size());
            for (std::size_t i : joint_idx) tuple.push_back(path.states[i]);
            a.joint.add(sticky_clip(tuple, kJointCap));
        });
    const double mc_s = timer.lap();
    const double mc_radius = tv_confidence_radius(config.replicates, kJointCap);
    for (std::size_t g = 0; g < grid.times.size(); ++g) {
        report.checks.push_back(mc_check(
            "y_mc_marginal_t" + time_tag(grid.times[g]), total_variation(fy, acc.at[g]),
            config.tol.mc_tv, mc_radius, acc.at[g].total(), g == 0 ? mc_s : 0.0,
            "A(nt)=" + std::to_string(grid.generations[g])));
        if (out)
            out->write_pmf("theorem2_mc_t" + time_tag(grid.times[g]),
                           pmf_rows(kJointCap, nullptr, &fy, &acc.at[g]));
    }

    std::vector<std::vector<TruncatedSeries>> kernels;
    for (std::size_t leg = 0; leg + 1 < joint_idx.size(); ++leg) {
        const double dt =
            std::log(grid.times[joint_idx[leg + 1]] / grid.times[joint_idx[leg]]);
        const auto base = limit.h(std::exp(-dt)).to_series(N);
        const auto ratio = divide_gf(fy, compose(fy, base));
        std::vector<TruncatedSeries> rows;
        rows.reserve(kJointCap + 1);
        TruncatedSeries pw = TruncatedSeries::point_mass(0, N);
        for (int y = 0; y <= kJointCap; ++y) {
            if (y > 0) pw = multiply(pw, base);
            rows.push_back(multiply(ratio, pw));
        }
        kernels.push_back(std::move(rows));
    }
    const auto joint_exact = joint_pmf_from_kernels(fy, kernels, kJointCap);
    report.checks.push_back(mc_check("y_joint", total_variation(joint_exact, acc.joint),
                                     config.tol.mc_tv, mc_radius, acc.joint.total(), timer.lap()));

    // (c) Stationarity of G as a matrix identity.
    {
        const double dt = std::log(2.0);
        const auto base = limit.h(std::exp(-dt)).to_series(N);
        const auto ratio = divide_gf(fy, compose(fy, base));
        std::vector<double> out_pmf(static_cast<std::size_t>(N) + 1, 0.0);
        TruncatedSeries pw = TruncatedSeries::point_mass(0, N);
        for (int y = 0; y <= N; ++y) {
            if (y > 0) pw = multiply(pw, base);
            const auto row = multiply(ratio, pw);
            const double w = fy.coeff(y);
            for (int v = 0; v <= N; ++v) out_pmf[static_cast<std::size_t>(v)] += w * row.coeff(v);
        }
        double worst = 0.0;
        for (int v = 0; v <= N; ++v)
            worst = std::max(worst, std::abs(out_pmf[static_cast<std::size_t>(v)] - fy.coeff(v)));
        report.checks.push_back(
            exact_check("g_stationarity_residual", worst, config.tol.exact, timer.lap()));
    }

    // K=2 special case: event-type rates of the simulator against the
    // birth/death/immigration rates nu/2, 1+nu/2, lambda_1 (per unit time,
    // from the stationary start).
    if (limit.lambdas.size() == 1) {
        const double horizon = 2.0;
        std::vector<double> cdf(fy.coeffs().begin(), fy.coeffs().end());
        for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
        struct EventAcc {
            long long births = 0, deaths = 0, imms = 0, n = 0;
            long long births2 = 0, deaths2 = 0, imms2 = 0;
            void merge_from(const EventAcc& o) {
                births += o.births;
                deaths += o.deaths;
                imms += o.imms;
                births2 += o.births2;
                deaths2 += o.deaths2;
                imms2 += o.imms2;
                n += o.n;
            }
        };
        auto events = parallel_replicates<EventAcc>(
            config.seed ^ 0x77c1a5u, config.replicates, config.workers,
            [&](long long, RandomStream& stream, EventAcc& a) {
                const double u = stream.uniform();
                long long init = 0;
                while (init < static_cast<long long>(cdf.size()) &&
                       u >= cdf[static_cast<std::size_t>(init)])
                    ++init;
                const auto traj = simulate_w(limit, init, 0.0, horizon, stream);
                long long b = 0, d = 0, m = 0;
                for (EventKind kind : traj.kinds) {
                    if (kind == EventKind::split)
                        ++b;
                    else if (kind == EventKind::death)
                        ++d;
                    else
                        ++m;
                }
                a.births += b;
                a.births2 += b * b;
                a.deaths += d;
                a.deaths2 += d * d;
                a.imms += m;
                a.imms2 += m * m;
                ++a.n;
            });
        const double mean_w = factorial_moment(fy, 1);
        const auto rate_check = [&](const char* name, long long sum, long long sum2,
                                    double want_rate) {
            const double n = static_cast<double>(events.n);
            const double mean = static_cast<double>(sum) / n;
            const double var =
                std::max(0.0, static_cast<double>(sum2) / n - mean * mean);
            const double se = std::sqrt(var / n);
            const double want = want_rate * horizon;
            report.checks.push_back(mc_check(name, std::abs(mean - want),
                                             std::max(3.0 * se, 1e-12), se, events.n, timer.lap(),
                                             "mean=" + fmt(mean) + " want=" + fmt(want)));
        };
        rate_check("w_birth_event_rate", events.births, events.births2,
                   limit.nu / 2.0 * mean_w);
        rate_check("w_death_event_rate", events.deaths, events.deaths2,
                   (1.0 + limit.nu / 2.0) * mean_w);
        rate_check("w_immigration_event_rate", events.imms, events.imms2, limit.beta_rate());
    }
    return report;
}

VerificationReport run_reverse(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"reverse", config.name, config.seed, config_hash(config), {}};
    const EnvironmentSpec& spec = config.environment;
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(spec);

    // The grid must be closed under t -> 1/t and contain 1.
    for (double t : config.time_grid) {
        const double inv = 1.0 / t;
        bool member = false;
        for (double v : config.time_grid)
            if (std::abs(v - inv) <= 1e-12 * std::max(1.0, inv)) member = true;
        if (!member) throw ConfigError("reverse experiment needs an inversion-closed grid");
    }
    if (std::find(config.time_grid.begin(), config.time_grid.end(), 1.0) == config.time_grid.end())
        throw std::invalid_argument("reverse experiment needs t = 1 on the grid");

    Timer timer;
    ScalingTable table(spec);
    ConditionedXSampler sampler(spec, table, config.mc_n, config.time_grid, N);
    const auto& times = sampler.grid().times;

    struct PathAcc {
        std::vector<PathSample> paths;
        void merge_from(PathAcc& o) {
            paths.insert(paths.end(), std::make_move_iterator(o.paths.begin()),
                         std::make_move_iterator(o.paths.end()));
        }
        void merge_from(const PathAcc& o) {
            paths.insert(paths.end(), o.paths.begin(), o.paths.end());
        }
    };

    // Forward suite A and an independently seeded suite B; B is reversed.
    auto run_x = [&](std::uint64_t seed) {
        return parallel_replicates<PathAcc>(seed, config.replicates, config.workers,
                                            [&](long long, RandomStream& stream, PathAcc& a) {
                                                a.paths.push_back(sampler.sample(stream));
                                            });
    };
    const auto fwd = run_x(config.seed);
    const auto indep = run_x(config.seed ^ 0x9e3779b97f4a7c15ULL);

    auto marginals = [&](const std::vector<PathSample>& paths, const std::vector<double>& grid) {
        std::vector<EmpiricalDistribution> out_emp(grid.size());
        for (const auto& p : paths)
            for (std::size_t i = 0; i < grid.size(); ++i) {
                std::size_t j = 0;
                while (std::abs(p.times[j] - grid[i]) > 1e-12 * std::max(1.0, grid[i])) ++j;
                out_emp[i].add(p.states[j]);
            }
        return out_emp;
    };

    const auto fwd_marg = marginals(fwd.paths, times);
    const auto rev_marg = marginals(reverse_marginals(indep.paths), times);
    const double build_s = timer.lap();

    // Two independent samples of the same law: effective sample size is the
    // harmonic mean, and the radius uses it.
    const double radius = tv_confidence_radius(config.replicates / 2, kJointCap);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        if (t < 1.0) continue;
        std::size_t inv_idx = 0;
        while (std::abs(times[inv_idx] - 1.0 / t) > 1e-12) ++inv_idx;
        auto [p, ptail] = rev_marg[i].pmf(kJointCap);
        auto [q, qtail] = fwd_marg[inv_idx].pmf(kJointCap);
        const double tv = total_variation(p, ptail, q, qtail);
        report.checks.push_back(mc_check("x_reversed_t" + time_tag(t), tv, config.tol.mc_tv,
                                         radius, rev_marg[i].total(), i == 0 ? build_s : 0.0,
                                         "vs forward at " + fmt(1.0 / t)));
        const auto lim = conditioned_limit_marginal(limit, 1.0 / t, N);
        if (out)
            out->write_pmf("reverse_x_t" + time_tag(t), pmf_rows(kJointCap, nullptr, &lim, &rev_marg[i]));
    }

    if (spec.has_immigration()) {
        const SimGrid ygrid(table, config.mc_n, config.time_grid);
        auto run_y = [&](std::uint64_t seed) {
            return parallel_replicates<PathAcc>(
                seed, config.replicates, config.workers,
                [&](long long, RandomStream& stream, PathAcc& a) {
                    a.paths.push_back(simulate_y(spec, ygrid, stream, config.population_cap));
                });
        };
        const auto yfwd = run_y(config.seed + 1);
        const auto yindep = run_y((config.seed + 1) ^ 0x9e3779b97f4a7c15ULL);
        const auto yfwd_marg = marginals(yfwd.paths, times);
        const auto yrev_marg = marginals(reverse_marginals(yindep.paths), times);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double t = times[i];
            if (t < 1.0) continue;
            std::size_t inv_idx = 0;
            while (std::abs(times[inv_idx] - 1.0 / t) > 1e-12) ++inv_idx;
            auto [p, ptail] = yrev_marg[i].pmf(kJointCap);
            auto [q, qtail] = yfwd_marg[inv_idx].pmf(kJointCap);
            const double tv = total_variation(p, ptail, q, qtail);
            report.checks.push_back(mc_check("y_reversed_t" + time_tag(t), tv, config.tol.mc_tv,
                                             radius, yrev_marg[i].total(), timer.lap(),
                                             "vs forward at " + fmt(1.0 / t)));
            if (out) {
                const auto fy = stationary_f_y(LimitSpec::from_environment(spec), N);
                out->write_pmf("reverse_y_t" + time_tag(t),
                               pmf_rows(kJointCap, nullptr, &fy, &yrev_marg[i]));
            }
        }
    }
    return report;
}

VerificationReport run_diagnostics(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"diag", config.name, config.seed, config_hash(config), {}};
    const EnvironmentSpec& spec = config.environment;
    const long long horizon = std::min<long long>(10 * config.n_values.back(), 200000);

    Timer timer;
    const auto diag = condition_diagnostics(spec, horizon);
    report.checks.push_back(exact_check("toeplitz_k1", std::abs(diag.toeplitz_k1 - spec.nu / 2.0),
                                        0.05, timer.lap(), "sum=" + fmt(diag.toeplitz_k1)));
    report.checks.push_back(exact_check("toeplitz_k2", std::abs(diag.toeplitz_k2 - spec.nu / 4.0),
                                        0.05, timer.lap(), "sum=" + fmt(diag.toeplitz_k2)));
    report.checks.push_back(
        exact_check("shape_uniformity", diag.shape_uniformity, 0.05, timer.lap()));
    report.checks.push_back(exact_check(
        "harmonic_sum", std::abs(diag.sum_one_minus_mean -
                                 spec.alpha * std::log(static_cast<double>(horizon))),
        2.0, timer.lap(), "sum=" + fmt(diag.sum_one_minus_mean)));

    // Cumulative-mean ratio vs u/t across the grid at the largest scale.
    ScalingTable table(spec);
    const long long n_max = config.n_values.back();
    double worst_eq16 = 0.0;
    for (std::size_t i = 0; i + 1 < config.time_grid.size(); ++i) {
        const double u = config.time_grid[i], t = config.time_grid[i + 1];
        const long long gu = table.scaling_A(static_cast<long long>(std::floor(u * static_cast<double>(n_max))));
        const long long gt = table.scaling_A(static_cast<long long>(std::floor(t * static_cast<double>(n_max))));
        worst_eq16 = std::max(worst_eq16, std::abs(table.cumulative_mean(gu, gt) - u / t));
    }
    report.checks.push_back(
        exact_check("mean_ratio_vs_time_ratio", worst_eq16, config.tol.eq16_abs, timer.lap()));

    // Shape telescoping residual along a short chain.
    const long long j = 10, n = 50;
    const int N = config.truncation;
    double worst_shape = 0.0;
    for (double s : {0.0, 0.25, 0.5, 0.75, 0.95}) {
        std::vector<double> fkn(static_cast<std::size_t>(n + 1));
        fkn[static_cast<std::size_t>(n)] = s;
        for (long long k = n; k > j; --k)
            fkn[static_cast<std::size_t>(k - 1)] = spec.offspring_eval(k, fkn[static_cast<std::size_t>(k)]);
        const double lhs = 1.0 / (1.0 - fkn[static_cast<std::size_t>(j)]);
        double rhs = 1.0 / (cumulative_mean(spec, j, n) * (1.0 - s));
        for (long long k = j + 1; k <= n; ++k) {
            const auto fk = offspring_gf(spec, k, N);
            rhs += shape_function(fk, fkn[static_cast<std::size_t>(k)]) / cumulative_mean(spec, j, k - 1);
        }
        worst_shape = std::max(worst_shape, std::abs(lhs - rhs));
    }
    report.checks.push_back(
        exact_check("shape_telescoping_residual", worst_shape, config.tol.exact, timer.lap()));

    if (out)
        out->write_diagnostics({{"toeplitz_k1", diag.toeplitz_k1},
                                {"toeplitz_k2", diag.toeplitz_k2},
                                {"shape_uniformity", diag.shape_uniformity},
                                {"sum_one_minus_mean", diag.sum_one_minus_mean},
                                {"eq16_worst", worst_eq16},
                                {"shape_telescoping_worst", worst_shape},
                                {"horizon", static_cast<double>(horizon)}});
    return report;
}

VerificationReport run_limit_simulators(const ScenarioConfig& config, const ReportWriter* out) {
    config.validate();
    VerificationReport report{"limit_sim", config.name, config.seed, config_hash(config), {}};
    const int N = config.truncation;
    const LimitSpec limit = LimitSpec::from_environment(config.environment);

    Timer timer;
    // Z marginal at t = log 2 from a single ancestor vs the transition g.f.
    {
        const double t = std::log(2.0);
        const auto exact = limit.h(std::exp(-t)).to_series(N);
        const long long reps = 10 * config.replicates;
        auto emp = parallel_replicates<EmpiricalDistribution>(
            config.seed ^ 0x5a17ULL, reps, config.workers,
            [&](long long, RandomStream& stream, EmpiricalDistribution& acc) {
                acc.add(simulate_z(limit, 1, 0.0, t + 1e-12, stream).state_at(t));
            });
        report.checks.push_back(mc_check("z_marginal_log2", total_variation(exact, emp),
                                         config.tol.zsim_tv, tv_confidence_radius(reps, kJointCap),
                                         reps, timer.lap()));
        if (out) out->write_pmf("zsim_log2", pmf_rows(kJointCap, nullptr, &exact, &emp));
    }

    // W started from f_Y stays f_Y-distributed.
    if (limit.has_immigration()) {
        const auto fy = stationary_f_y(limit, N);
        std::vector<double> cdf(fy.coeffs().begin(), fy.coeffs().end());
        for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
        struct Acc {
            EmpiricalDistribution half, one;
            void merge_from(const Acc& o) {
                half.merge_from(o.half);
                one.merge_from(o.one);
            }
        };
        auto acc = parallel_replicates<Acc>(
            config.seed ^ 0x57a7ULL, config.replicates, config.workers,
            [&](long long, RandomStream& stream, Acc& a) {
                const double u = stream.uniform();
                long long init = 0;
                while (init < static_cast<long long>(cdf.size()) &&
                       u >= cdf[static_cast<std::size_t>(init)])
                    ++init;
                const auto traj = simulate_w(limit, init, 0.0, 1.0 + 1e-12, stream);
                a.half.add(traj.state_at(0.5));
                a.one.add(traj.state_at(1.0));
            });
        const double radius = tv_confidence_radius(config.replicates, kJointCap);
        report.checks.push_back(mc_check("w_stationary_t0p5", total_variation(fy, acc.half),
                                         config.tol.wsim_tv, radius, config.replicates,
                                         timer.lap()));
        report.checks.push_back(mc_check("w_stationary_t1", total_variation(fy, acc.one),
                                         config.tol.wsim_tv, radius, config.replicates, 0.0));
        if (out) out->write_pmf("wsim_t1", pmf_rows(kJointCap, nullptr, &fy, &acc.one));
    }
    return report;
}

std::vector<VerificationReport> run_all(const ScenarioConfig& config, const ReportWriter* out) {
    std::vector<VerificationReport> reports;
    reports.push_back(run_yaglom(config, out));
    reports.push_back(run_entrance_law(config, out));
    reports.push_back(run_theorem1_fdd(config, out));
    if (config.environment.has_immigration()) reports.push_back(run_theorem2(config, out));
    reports.push_back(run_reverse(config, out));
    reports.push_back(run_diagnostics(config, out));
    reports.push_back(run_limit_simulators(config, out));
    if (out) out->write_reports(reports);
    return reports;
}

}  // namespace bpve
