#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bpve/config.hpp"
#include "bpve/errors.hpp"
#include "bpve/experiments.hpp"

using namespace bpve;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kSmallConfig = R"(
[environment]
family = linear_fractional
alpha = 1.0
nu = 2.0
immigration = 1:0.5 2:0.25

[limit]
eps = 0.5

[grid]
times = 0.5 1 2
n_values = 50 200

[mc]
n = 100
replicates = 2000
seed = 7
truncation = 128

[tolerances]
scale_tv = 0.1
mc_tv = 0.2
survival_rel = 0.5
mean_rel = 0.3
)";

}  // namespace

TEST_CASE("config parsing") {
    const auto config = parse_config_text(kSmallConfig, "small");
    CHECK(config.name == "small");
    CHECK(config.environment.nu == doctest::Approx(2.0));
    REQUIRE(config.environment.immigration.size() == 2);
    CHECK(config.environment.immigration[1].value == 2);
    CHECK(config.environment.immigration[1].weight == doctest::Approx(0.25));
    CHECK(config.eps == doctest::Approx(0.5));
    CHECK(config.n_values == std::vector<long long>{50, 200});
    CHECK(config.replicates == 2000);
    CHECK(config.truncation == 128);
    CHECK(config.tol.mc_tv == doctest::Approx(0.2));

    CHECK_THROWS_AS(parse_config_text("[nope]\n", "x"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[mc]\nbogus = 1\n", "x"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[mc]\nreplicates = 10\n", "x"), ConfigError);  // < 1000
    CHECK_THROWS_AS(parse_config_text("[grid]\ntimes = 2 1\n", "x"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[environment]\nfamily = bernoulli\nnu = 1.0\n", "x"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("stray = 1\n", "x"), ConfigError);

    // Hash is stable under reparsing and sensitive to content.
    const auto again = parse_config_text(kSmallConfig, "small");
    CHECK(config_hash(config) == config_hash(again));
    auto tweaked = config;
    tweaked.seed += 1;
    CHECK(config_hash(config) != config_hash(tweaked));
}

TEST_CASE("default config validates") {
    const auto config = default_config();
    CHECK_NOTHROW(config.validate());
    CHECK(config.environment.nu == doctest::Approx(2.0));
}

TEST_CASE("entrance and diagnostics experiments pass on the small scenario") {
    auto config = parse_config_text(kSmallConfig, "small");
    const auto entrance = run_entrance_law(config);
    CHECK(entrance.all_passed());
    bool saw_survival = false;
    for (const auto& c : entrance.checks)
        if (c.name == "survival_identity") {
            saw_survival = true;
            CHECK(c.value <= 1e-12);
        }
    CHECK(saw_survival);

    const auto diag = run_diagnostics(config);
    CHECK(diag.all_passed());
}

TEST_CASE("yaglom experiment on the small scenario") {
    auto config = parse_config_text(kSmallConfig, "small");
    const auto rep = run_yaglom(config);
    for (const auto& c : rep.checks) CHECK(c.passed);
}

TEST_CASE("bernoulli scenario: conditioning is exact at every scale") {
    const char* text = R"(
[environment]
family = bernoulli
alpha = 1.0
nu = 0.0
immigration = 1:1.0
[grid]
times = 0.5 1 2
n_values = 50 200 1000
[mc]
replicates = 2000
)";
    const auto config = parse_config_text(text, "bern");
    // Conditioned on survival a Bernoulli chain is the point mass at 1, so
    // every TV against Geom(1) vanishes to rounding.
    const auto rep = run_yaglom(config);
    for (const auto& c : rep.checks)
        if (c.name.rfind("tv_n", 0) == 0) CHECK(c.value <= 1e-10);

    // nu = 0 entrance law: two-state computation, exact match.
    const auto ent = run_entrance_law(config);
    CHECK(ent.all_passed());
}

TEST_CASE("misconfigured tolerance below confidence radius is rejected") {
    auto config = parse_config_text(kSmallConfig, "small");
    config.tol.mc_tv = 1e-4;  // impossible with 2000 replicates
    CHECK_THROWS_AS(run_theorem1_fdd(config), ConfigError);
}

TEST_CASE("report writing is deterministic") {
    auto config = parse_config_text(kSmallConfig, "small");
    const auto dir1 = std::filesystem::temp_directory_path() / "bpve_det_a";
    const auto dir2 = std::filesystem::temp_directory_path() / "bpve_det_b";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    {
        ReportWriter w1(dir1, "json");
        ReportWriter w2(dir2, "json");
        run_entrance_law(config, &w1);
        run_entrance_law(config, &w2);
    }
    bool compared = false;
    for (const auto& entry : std::filesystem::directory_iterator(dir1)) {
        if (entry.path().extension() != ".csv") continue;
        compared = true;
        CHECK(slurp(entry.path()) == slurp(dir2 / entry.path().filename()));
    }
    CHECK(compared);
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("report records carry value and tolerance on failure") {
    auto config = parse_config_text(kSmallConfig, "small");
    config.tol.scale_tv = 1e-15;  // force a failure at the final n
    const auto rep = run_yaglom(config);
    CHECK(!rep.all_passed());
    for (const auto& c : rep.checks)
        if (!c.passed) {
            CHECK(c.value > c.tolerance);
            CHECK(c.tolerance == doctest::Approx(1e-15));
        }
}
