#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bpve/limit_process.hpp"
#include "bpve/stats.hpp"

using namespace bpve;

TEST_CASE("empirical distribution counting and merging") {
    EmpiricalDistribution a, b;
    a.add(0);
    a.add(2);
    a.add(2);
    b.add(1);
    b.add_overflow();
    EmpiricalDistribution merged = a;
    merged.merge_from(b);
    CHECK(merged.total() == 5);
    CHECK(merged.overflow_count() == 1);
    CHECK(merged.count(2) == 2);

    // Merge equals accumulation in either order.
    EmpiricalDistribution other = b;
    other.merge_from(a);
    CHECK(other.total() == merged.total());
    for (long long s = 0; s <= 3; ++s) CHECK(other.count(s) == merged.count(s));

    auto [pmf, tail] = merged.pmf(1);
    CHECK(pmf[0] == doctest::Approx(0.2));
    CHECK(pmf[1] == doctest::Approx(0.2));
    CHECK(tail == doctest::Approx(0.6));  // two 2s + one overflow
}

TEST_CASE("total variation basics") {
    const int N = 32;
    const auto p = TruncatedSeries::bernoulli(0.5, N);
    CHECK(total_variation(p, p) == doctest::Approx(0.0));
    const auto d0 = TruncatedSeries::point_mass(0, N);
    const auto d1 = TruncatedSeries::point_mass(1, N);
    CHECK(total_variation(d0, d1) == doctest::Approx(1.0));

    // Geometric truncated at N vs itself with the tail counted separately.
    const LimitSpec nu2{2.0, {}};
    const auto geom = quasi_stationary_pmf(nu2, N);
    CHECK(total_variation(geom, geom) <= 1e-15);

    std::vector<double> unnorm{0.5, 0.1};
    CHECK_THROWS(total_variation(unnorm, 0.0, unnorm, 0.0));
}

TEST_CASE("total variation is symmetric and satisfies the triangle inequality") {
    std::mt19937_64 eng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        auto mk = [&] {
            std::vector<double> c(8);
            double sum = 0.0;
            for (double& v : c) sum += (v = u(eng));
            for (double& v : c) v /= sum;
            return c;
        };
        const auto p = mk(), q = mk(), r = mk();
        const double pq = total_variation(p, 0.0, q, 0.0);
        const double qp = total_variation(q, 0.0, p, 0.0);
        const double pr = total_variation(p, 0.0, r, 0.0);
        const double rq = total_variation(r, 0.0, q, 0.0);
        CHECK(pq == doctest::Approx(qp).epsilon(1e-14));
        CHECK(pq <= pr + rq + 1e-12);
    }
}

TEST_CASE("tv confidence radius") {
    CHECK(tv_confidence_radius(100000, 64) == doctest::Approx(0.0179).epsilon(0.01));
    CHECK(tv_confidence_radius(1, 2) >= 0.5);
    CHECK(tv_confidence_radius(1000000000, 64) <= 1e-3);
    CHECK_THROWS(tv_confidence_radius(0, 4));
}

TEST_CASE("joint pmf from kernels") {
    const int N = 64, cap = 8;
    // Single time point: just the initial law.
    const auto init = TruncatedSeries::bernoulli(0.3, N);
    const auto single = joint_pmf_from_kernels(init, {}, cap);
    auto [m0, tail0] = single.marginal(0);
    CHECK(m0[0] == doctest::Approx(0.7));
    CHECK(m0[1] == doctest::Approx(0.3));
    CHECK(tail0 == doctest::Approx(0.0));

    // Identity kernel: diagonal joint.
    std::vector<TruncatedSeries> identity_rows;
    for (int x = 0; x <= cap; ++x)
        identity_rows.push_back(TruncatedSeries::point_mass(x, N));
    const auto diag = joint_pmf_from_kernels(init, {identity_rows}, cap);
    const std::vector<long long> t00{0, 0}, t11{1, 1}, t01{0, 1};
    CHECK(diag.cells().at(JointPmf::encode(t00, cap)) == doctest::Approx(0.7));
    CHECK(diag.cells().at(JointPmf::encode(t11, cap)) == doctest::Approx(0.3));
    CHECK(diag.cells().count(JointPmf::encode(t01, cap)) == 0);

    // Three points with LF kernels; marginalizing the middle point gives the
    // two-point joint built from the composed kernel. The cap must hold all
    // but ~q^cap of the mass, otherwise the escape bucket at the middle time
    // breaks exact associativity.
    const int wide = 48;
    const LimitSpec spec{2.0, {}};
    auto rows_for = [&](double a) {
        std::vector<TruncatedSeries> rows;
        rows.push_back(TruncatedSeries::point_mass(0, N));
        for (int x = 1; x <= wide; ++x) rows.push_back(power(spec.h(a).to_series(N), x));
        return rows;
    };
    const auto init_geom = quasi_stationary_pmf(spec, N);
    const auto three = joint_pmf_from_kernels(init_geom, {rows_for(0.8), rows_for(0.7)}, wide);
    const auto two = joint_pmf_from_kernels(init_geom, {rows_for(0.8 * 0.7)}, wide);
    const auto collapsed = three.marginalize(1);
    double worst = 0.0;
    for (const auto& [key, mass] : two.cells()) {
        const auto it = collapsed.cells().find(key);
        const double other = it == collapsed.cells().end() ? 0.0 : it->second;
        worst = std::max(worst, std::abs(mass - other));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("joint empirical vs joint pmf TV") {
    const int cap = 4;
    JointPmf exact(2, cap);
    const std::vector<long long> a{1, 1}, b{2, 1};
    exact.add(a, 0.5);
    exact.add(b, 0.5);
    JointEmpirical emp(2, cap);
    for (int i = 0; i < 50; ++i) emp.add(a);
    for (int i = 0; i < 50; ++i) emp.add(b);
    CHECK(total_variation(exact, emp) == doctest::Approx(0.0));
    JointEmpirical skew(2, cap);
    for (int i = 0; i < 100; ++i) skew.add(a);
    CHECK(total_variation(exact, skew) == doctest::Approx(0.5));
}
