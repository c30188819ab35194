#include "doctest.h"
#include "seedbank/experiments.hpp"
#include "seedbank/errors.hpp"

#include <cmath>

using namespace seedbank;

TEST_CASE("time scales") {
    const TimeScaleReport r = time_scales(Geography::cycle(100), SeedBankProfile::single(1.0, 1.0), Model::M1);
    CHECK(r.beta_n == doctest::Approx(400.0));
    CHECK(r.regime == GrowthRegime::NotApplicable);

    // gamma = 0.75 (alpha = 0.5, beta = 2): beta** = |G|^{1/(2 gamma - 1)} = |G|^2
    const auto p = SeedBankProfile::polynomial({1.0, 0.5, 1.0, 2.0}, 10);
    const TimeScaleReport s = time_scales(Geography::cycle(10000), p, Model::M2);
    REQUIRE(s.beta_2star);
    CHECK(*s.beta_2star == doctest::Approx(1e8));
    REQUIRE(s.beta_star);
    CHECK(*s.beta_star == doctest::Approx(100.0));
    CHECK(s.regime == GrowthRegime::I);

    // gamma = 0.4 forces regime I however large M is
    const auto q = SeedBankProfile::polynomial({1.0, 0.4, 1.0, 1.0}, 100000);
    CHECK(time_scales(Geography::cycle(4), q, Model::M2).regime == GrowthRegime::I);
}

TEST_CASE("M growth rules") {
    MRule c{MRule::Kind::Constant, 7.0, 1.0};
    CHECK(c(3) == 7);
    MRule p{MRule::Kind::Power, 2.0, 1.5};
    CHECK(p(4) == 16);
}

TEST_CASE("finite-systems scheme basics") {
    ExperimentSpec s;
    s.ladder = {2, 4};
    s.replicas = 200;
    s.theta = 0.3;
    s.s_grid = {0.0, 0.25};
    s.threads = 2;
    const FssResult r = finite_systems_run(s);
    REQUIRE(r.entries.size() == 2);
    for (const LadderRun& e : r.entries) {
        double mean = 0.0, sq = 0.0;
        for (const auto& path : e.theta_hat) {
            CHECK(path[0] == doctest::Approx(0.3));
            mean += path[1];
            sq += path[1] * path[1];
        }
        const double n = static_cast<double>(e.theta_hat.size());
        mean /= n;
        const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
        CHECK(std::abs(mean - 0.3) < 4.0 * se);
    }
    s.budget = 10.0;
    CHECK_THROWS_AS(finite_systems_run(s), BudgetRefusal);
    s.budget = 1e12;
    s.ladder = {4, 2};
    CHECK_THROWS(finite_systems_run(s));
}

TEST_CASE("reference diffusion") {
    ReferenceOptions o;
    o.replicas = 20;
    const ReferenceEnsemble flat = fg_diffusion_reference([](double) { return 0.0; }, 0.4, {0.0, 1.0, 2.0}, o);
    for (const auto& p : flat.paths)
        for (double v : p) CHECK(v == doctest::Approx(0.4));

    o.replicas = 2000;
    o.hitting_horizon = 40.0;
    o.ds = 2e-3;
    const ReferenceEnsemble e = fg_diffusion_reference([](double t) { return 0.5 * t * (1 - t); }, 0.3, {1.0}, o);
    double ones = 0.0, n = 0.0;
    for (std::size_t r = 0; r < e.trap.size(); ++r) {
        if (e.censored[r]) continue;
        n += 1.0;
        ones += e.trap[r] == 1;
    }
    REQUIRE(n > 1900);
    const double p = ones / n;
    CHECK(std::abs(p - 0.3) < 4.0 * std::sqrt(0.21 / n));
}

TEST_CASE("boundary accessibility") {
    CHECK(accessibility(DiffusionFunction::fisher_wright(1.0)).accessible);
    CHECK_FALSE(accessibility(DiffusionFunction::ohta_kimura(1.0)).accessible);
}

TEST_CASE("trapping from a trap is immediate") {
    ExperimentSpec s;
    s.ladder = {2};
    s.theta = 0.0;
    TrappingOptions o;
    o.replicas = 5;
    const TrappingResult r = trapping_time(s, o);
    for (double h : r.entries[0].h_over_beta) CHECK(h == 0.0);
}

TEST_CASE("pair diagnostic") {
    SystemState prod = SystemState::constant(Model::M2, 50, 2, 0.3);
    CHECK(pair_diagnostic(prod, 0, 2) == doctest::Approx(0.21));
    SystemState ones = SystemState::constant(Model::M2, 50, 2, 1.0);
    CHECK(pair_diagnostic(ones, 0, 2) == doctest::Approx(0.0));
    Rng rng(3);
    SystemState b = SystemState::bernoulli(Model::M2, 4000, 2, 0.3, rng);
    CHECK(pair_diagnostic(b, 0, 2) == doctest::Approx(0.21).epsilon(0.03));
    CHECK(clustering_depth(640.0, 2.0, 80) == 2);
    CHECK(clustering_depth(1e12, 2.0, 80) == 80);
}

TEST_CASE("renewal laws") {
    const double g = 0.8;
    const auto f = renewal_increment_law(g, 2000);
    CHECK(f[1] == 0.0);
    CHECK(f[2] == doctest::Approx(1.0 - std::pow(2.0, -g)));
    const auto fs = intersection_increment_law(g, 2000);
    // simulated intersection increments against the exact law on small values
    Rng rng(12);
    const int n = 50000;
    std::vector<int> counts(11, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = sample_intersection_increment(g, 100000, rng);
        if (v <= 10) ++counts[v];
    }
    for (int k = 2; k <= 10; ++k) {
        const double se = std::sqrt(fs[k] * (1 - fs[k]) / n);
        CHECK(std::abs(counts[k] / double(n) - fs[k]) < 4.0 * se + 1e-4);
    }
    RenewalOptions o;
    CHECK_THROWS(renewal_intersection_exponent(0.4, o));
}
