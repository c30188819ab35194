#include "doctest.h"
#include "seedbank/forward_sde.hpp"
#include "seedbank/stats.hpp"

#include <cmath>

using namespace seedbank;

namespace {

SystemParams m1(const Geography& geo, double rate, DiffusionFunction g, double K = 1.0, double e = 1.0) {
    MigrationKernel k = rate > 0.0 ? build_kernel(geo, NearestNeighbour{rate}) : MigrationKernel::zero(geo);
    return SystemParams{Model::M1, k, SeedBankProfile::single(K, e), g, {}};
}

} // namespace

TEST_CASE("drift plug-in values") {
    const auto p = m1(Geography::cycle(1), 0.0, DiffusionFunction::fisher_wright(1.0));
    SystemState s = SystemState::constant(Model::M1, 1, 1, 0.0);
    s.x[0] = 1.0;
    const DriftRates r = drift(s, p);
    CHECK(r.dx[0] == doctest::Approx(-1.0));
    CHECK(r.dy[0] == doctest::Approx(1.0));

    const auto q = m1(Geography::torus(1, 3), 0.5, DiffusionFunction::fisher_wright(1.0));
    const DriftRates flat = drift(SystemState::for_params(q, 0.37), q);
    for (double v : flat.dx) CHECK(v == doctest::Approx(0.0));
    for (double v : flat.dy) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("Model 3 with identity displacement reproduces Model 2") {
    const Geography geo = Geography::torus(1, 2);
    const auto profile = SeedBankProfile::explicit_profile({1.0, 0.5}, {1.0, 0.25});
    const auto k = build_kernel(geo, NearestNeighbour{0.7});
    const SystemParams p2{Model::M2, k, profile, DiffusionFunction::fisher_wright(1.0), {}};
    SystemParams p3{Model::M3, k, profile, DiffusionFunction::fisher_wright(1.0), {}};
    p3.displacement = {MigrationKernel::identity(geo), MigrationKernel::identity(geo)};
    Rng rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        SystemState s = SystemState::constant(Model::M2, geo.size(), 2, 0.0);
        for (auto& v : s.x) v = U(rng);
        for (auto& v : s.y) v = U(rng);
        SystemState s3 = s;
        s3.model = Model::M3;
        const DriftRates a = drift(s, p2), b = drift(s3, p3);
        for (std::size_t i = 0; i < a.dx.size(); ++i) CHECK(a.dx[i] == doctest::Approx(b.dx[i]).epsilon(1e-12));
        for (std::size_t i = 0; i < a.dy.size(); ++i) CHECK(a.dy[i] == doctest::Approx(b.dy[i]).epsilon(1e-12));
    }
}

TEST_CASE("noise-free integration matches the linear ODE") {
    const auto p = m1(Geography::cycle(1), 0.0, DiffusionFunction::zero());
    SystemState s = SystemState::constant(Model::M1, 1, 1, 0.0);
    s.x[0] = 1.0;
    Rng rng(1);
    RunOptions o;
    o.horizon = 2.0;
    o.dt = 1e-3;
    o.observe = {0.5, 1.0, 2.0};
    const Trajectory tr = run(s, p, o, rng);
    REQUIRE(tr.records.size() == 3);
    for (const Observation& ob : tr.records)
        CHECK(std::abs(ob.theta_x - (0.5 + 0.5 * std::exp(-2.0 * ob.time))) < 1e-3);
}

TEST_CASE("traps and zero noise at the boundary") {
    const auto fw = DiffusionFunction::fisher_wright(1.0);
    CHECK(fw(1.0) == 0.0);
    CHECK(fw(0.0) == 0.0);
    const auto p = m1(Geography::torus(1, 2), 0.5, fw);
    Rng rng(3);
    RunOptions o;
    o.horizon = 3.0;
    o.observe = {1.0, 2.0, 3.0};
    const Trajectory tr = run(SystemState::for_params(p, 0.0), p, o, rng);
    for (const Observation& ob : tr.records) CHECK(ob.theta_hat == 0.0);
    for (double x : tr.final_state.x) CHECK(x == 0.0);
    o.observe.clear();
    CHECK(run(SystemState::for_params(p, 0.5), p, o, rng).records.empty());
}

TEST_CASE("bounded updates keep mean and variance") {
    for (auto [m, v] : {std::pair{0.01, 0.004}, std::pair{0.3, 0.001}, std::pair{0.97, 0.01}, std::pair{0.5, 0.002}}) {
        Rng rng(11);
        std::normal_distribution<double> z;
        RunningStats st;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            const double x = bounded_update(m, v, z(rng), BoundaryScheme::MomentMatching);
            REQUIRE(x >= 0.0);
            REQUIRE(x <= 1.0);
            st.add(x);
        }
        CHECK(std::abs(st.mean() - m) < 4.0 * st.standard_error());
        CHECK(st.variance() == doctest::Approx(v).epsilon(0.03));
    }
    CHECK(bounded_update(0.0, 0.0, 1.3, BoundaryScheme::MomentMatching) == 0.0);
    CHECK(bounded_update(0.0, 0.0, 1.3, BoundaryScheme::Clamp) == 0.0);
}

TEST_CASE("identical seeds give identical trajectories") {
    const auto p = m1(Geography::torus(1, 3), 0.5, DiffusionFunction::fisher_wright(1.0));
    RunOptions o;
    o.horizon = 2.0;
    o.observe = {0.5, 1.0, 2.0};
    Rng a(77), b(77);
    const Trajectory ta = run(SystemState::for_params(p, 0.4), p, o, a);
    const Trajectory tb = run(SystemState::for_params(p, 0.4), p, o, b);
    CHECK(ta.final_state.x == tb.final_state.x);
    CHECK(ta.final_state.y == tb.final_state.y);
}

TEST_CASE("Model 2 with a single colour reproduces Model 1 bitwise") {
    const Geography geo = Geography::torus(1, 3);
    const auto k = build_kernel(geo, NearestNeighbour{0.5});
    const SystemParams p1{Model::M1, k, SeedBankProfile::single(1.0, 0.5), DiffusionFunction::fisher_wright(1.0), {}};
    SystemParams p2 = p1;
    p2.model = Model::M2;
    RunOptions o;
    o.horizon = 3.0;
    Rng a(9), b(9);
    const Trajectory t1 = run(SystemState::for_params(p1, 0.3), p1, o, a);
    const Trajectory t2 = run(SystemState::for_params(p2, 0.3), p2, o, b);
    CHECK(t1.final_state.x == t2.final_state.x);
    CHECK(t1.final_state.y == t2.final_state.y);
}

TEST_CASE("macroscopic variables") {
    const auto prof = SeedBankProfile::single(1.0, 1.0);
    const SystemState c = SystemState::constant(Model::M1, 5, 1, 0.3);
    CHECK(macroscopic(c, prof).theta_hat == doctest::Approx(0.3));
    CHECK(macroscopic(c, prof).theta_x == doctest::Approx(0.3));
    SystemState s = SystemState::constant(Model::M1, 5, 1, 0.0);
    for (auto& x : s.x) x = 1.0;
    CHECK(macroscopic(s, prof).theta_hat == doctest::Approx(0.5));
    CHECK(macroscopic(s, prof).theta_x == doctest::Approx(1.0));
    SystemState t = SystemState::constant(Model::M2, 3, 2, 0.0);
    for (std::size_t i = 0; i < 3; ++i) t.dormant(i, 0) = 1.0;
    CHECK(macroscopic(t, SeedBankProfile::explicit_profile({1.0, 1.0}, {1.0, 1.0})).theta_hat == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("increasing process increments") {
    const auto prof = SeedBankProfile::single(1.0, 1.0);
    const auto g = DiffusionFunction::fisher_wright(2.0);
    CHECK(increasing_process_increment(SystemState::constant(Model::M1, 4, 1, 0.5), g, prof, 0.1).rescaled ==
          doctest::Approx(0.1 * 2.0 / 4.0));
    CHECK(increasing_process_increment(SystemState::constant(Model::M1, 4, 1, 0.0), g, prof, 0.1).rescaled == 0.0);
}

TEST_CASE("diversity and depth moments") {
    SystemState s = SystemState::constant(Model::M1, 6, 1, 1.0);
    CHECK(diversity_and_depth_moments(s, 0).diversity == 0.0);
    CHECK(diversity_and_depth_moments(SystemState::constant(Model::M1, 6, 1, 0.3), 0).diversity == doctest::Approx(0.21));
    Rng rng(2);
    const SystemState b = SystemState::bernoulli(Model::M1, 20000, 1, 0.3, rng);
    const DepthMoments dm = diversity_and_depth_moments(b, 0);
    CHECK(dm.diversity == 0.0); // Bernoulli components are 0 or 1
    CHECK(dm.variances[0] == doctest::Approx(0.21).epsilon(0.03));
}

TEST_CASE("macroscopic martingale and quadratic variation") {
    const auto p = m1(Geography::torus(1, 8), 0.5, DiffusionFunction::fisher_wright(1.0));
    RunOptions o;
    o.horizon = 5.0;
    o.observe = {5.0};
    RunningStats mean, sq, qv;
    for (std::size_t r = 0; r < 1000; ++r) {
        Rng rng = make_rng(4, r, "noise");
        const Trajectory tr = run(SystemState::for_params(p, 0.3), p, o, rng);
        const double th = tr.records.back().theta_hat;
        mean.add(th);
        sq.add((th - 0.3) * (th - 0.3));
        qv.add(tr.records.back().qvar);
    }
    CHECK(std::abs(mean.mean() - 0.3) < 4.0 * mean.standard_error());
    CHECK(sq.mean() == doctest::Approx(qv.mean()).epsilon(0.1));
}
