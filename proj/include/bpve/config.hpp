#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpve/environment.hpp"

namespace bpve {

/// Per-check tolerance budgets. Exact-identity residuals and Monte Carlo TV
/// budgets are separate knobs; every default is pinned here and can be
/// overridden from the [tolerances] config section.
struct Tolerances {
    double exact = 1e-8;         // exact pushforward/Chapman-Kolmogorov residuals
    double identity = 1e-12;     // closed-form identities
    double mc_tv = 0.03;         // Monte Carlo marginal/joint TV budgets
    double scale_tv = 0.02;      // exact finite-n vs limit-law TV budgets
    double survival_rel = 0.10;  // n P(X_{A(n)}>0) vs 2/(2+nu), relative
    double mean_rel = 0.05;      // conditional mean vs limit, relative
    double rate_fd = 1e-6;       // finite-difference rate recovery
    double zsim_tv = 0.01;       // Z simulator marginal TV
    double wsim_tv = 0.02;       // W stationarity TV
    double eq16_abs = 0.01;      // cumulative-mean ratio vs u/t, absolute
};

struct ScenarioConfig {
    std::string name = "lf-nu2";
    EnvironmentSpec environment;
    double eps = 0.5;
    std::vector<double> time_grid{0.5, 1.0, 2.0};
    std::vector<long long> n_values{100, 1000, 10000};
    long long mc_n = 2000;
    long long replicates = 100000;
    std::uint64_t seed = 20260809;
    int workers = 0;  // 0 = hardware concurrency
    int truncation = 256;
    long long population_cap = 1'000'000;
    Tolerances tol;

    void validate() const;

    /// Canonical key=value rendering used for the config hash in reports.
    std::string canonical_text() const;
};

ScenarioConfig default_config();

/// Parses the flat-section key=value format. Unknown sections or keys are
/// errors; all keys are optional.
ScenarioConfig parse_config_text(const std::string& text, const std::string& name);
ScenarioConfig parse_config_file(const std::string& path);

std::string config_hash(const ScenarioConfig& config);

}  // namespace bpve
