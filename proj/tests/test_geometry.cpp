#include "doctest.h"
#include "seedbank/geometry.hpp"

#include <cmath>
#include <numeric>

using namespace seedbank;

TEST_CASE("geography sizes and arithmetic") {
    CHECK(Geography::torus(1, 2).size() == 4);
    CHECK(Geography::hierarchical(2, 3).size() == 8);
    const Geography g = Geography::torus(2, 1);
    const std::vector<int> e1{1, 0};
    const Site s = g.encode(e1);
    CHECK(g.add(s, s) == 0);
    CHECK(g.add(s, g.neg(s)) == 0);
}

TEST_CASE("nearest-neighbour rows") {
    const auto k = build_kernel(Geography::torus(1, 2), NearestNeighbour{0.5});
    const Geography& g = k.geography();
    CHECK(k.from_origin(1) == doctest::Approx(0.5));
    CHECK(k.from_origin(g.neg(1)) == doctest::Approx(0.5));
    CHECK(k.total_rate() == doctest::Approx(1.0));

    // on the 2-site quotient both steps land on site 1
    const auto folded = build_kernel(Geography::torus(1, 1), NearestNeighbour{0.5});
    CHECK(folded.from_origin(1) == doctest::Approx(1.0));
}

TEST_CASE("hierarchical rates sum the geometric series") {
    // c = 1/2, N = 2: a(0, j) at distance 1 is sum_k (c^{k-1}/2^{k-1}) 2^{-k} = 4/7
    const Geography g = Geography::hierarchical(2, 12);
    const auto k = build_kernel(g, HierarchicalRates{0.5});
    Site nb = 1;
    REQUIRE(g.hierarchical_distance(0, nb) == 1);
    CHECK(k.from_origin(nb) == doctest::Approx(4.0 / 7.0).epsilon(1e-6));
}

TEST_CASE("heavy-tail fold conserves mass") {
    KernelOptions o;
    o.shell_cap = 1 << 20;
    const auto k = build_kernel(Geography::torus(1, 4), HeavyTail{1.0, 0.8}, o);
    REQUIRE(k.infinite_total_rate());
    CHECK(std::abs(k.total_mass() - *k.infinite_total_rate()) <= 1e-9 * *k.infinite_total_rate() + k.fold_error());
}

TEST_CASE("two-state transition probability") {
    const auto k = MigrationKernel::from_row(Geography::cycle(2), {0.0, 1.0});
    for (double t : {0.0, 0.1, 0.5, 1.0, 3.0}) {
        const auto e = transition_probability(k, t, 0, 0);
        CHECK(e.value == doctest::Approx(0.5 * (1.0 + std::exp(-2.0 * t))).epsilon(1e-10));
    }
}

TEST_CASE("transition rows are stochastic and start at the identity") {
    const auto k = build_kernel(Geography::torus(2, 3), NearestNeighbour{0.5});
    const auto r0 = transition_row(k, 0.0);
    CHECK(r0.p[0] == doctest::Approx(1.0));
    CHECK(std::accumulate(r0.p.begin(), r0.p.end(), 0.0) == doctest::Approx(1.0));
    const auto r = transition_row(k, 7.3);
    CHECK(std::accumulate(r.p.begin(), r.p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
    const auto mc = transition_probability(k, 2.0, 0, 1, TransitionMethod::MonteCarlo, 20000, 3);
    const auto ex = transition_probability(k, 2.0, 0, 1);
    CHECK(std::abs(mc.value - ex.value) < 4.0 * mc.error + 1e-12);
}

TEST_CASE("uniform-jump mixing time") {
    // the deviation of the uniform chain is (m-1) e^{-t}
    const int m = 16;
    const auto k = MigrationKernel::uniform_jump(Geography::cycle(m), 1.0);
    const double eps = 0.01;
    const auto r = estimate_mixing_time(k, eps);
    CHECK(r.time == doctest::Approx(std::log((m - 1) / eps)).epsilon(1e-3));
    CHECK(estimate_mixing_time(MigrationKernel::zero(Geography::cycle(1)), eps).time == 0.0);
}

TEST_CASE("nearest-neighbour mixing is diffusive") {
    std::vector<double> ln, lpsi;
    for (int n : {4, 8, 16}) {
        const auto k = build_kernel(Geography::torus(1, n), NearestNeighbour{0.5});
        ln.push_back(std::log(n));
        lpsi.push_back(std::log(estimate_mixing_time(k, 0.25).time));
    }
    const double slope = (lpsi[2] - lpsi[0]) / (ln[2] - ln[0]);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("spectral gap of the 2-cycle") {
    const auto k = MigrationKernel::from_row(Geography::cycle(2), {0.0, 1.0});
    CHECK(spectral_gap(k) == doctest::Approx(2.0));
}
