#include "doctest.h"
#include "seedbank/dual.hpp"
#include "seedbank/forward_sde.hpp"
#include "seedbank/stats.hpp"

#include <array>
#include <cmath>

using namespace seedbank;

namespace {

// Transient distribution of a small chain by uniformisation.
std::vector<double> evolve(const std::vector<std::vector<double>>& Q, std::vector<double> p, double t) {
    const std::size_t n = Q.size();
    double lam = 0.0;
    for (std::size_t i = 0; i < n; ++i) lam = std::max(lam, -Q[i][i]);
    std::vector<double> out(n, 0.0), next(n);
    double w = std::exp(-lam * t);
    for (int k = 0; k < 400; ++k) {
        for (std::size_t i = 0; i < n; ++i) out[i] += w * p[i];
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[j] += p[i] * ((i == j ? 1.0 : 0.0) + Q[i][j] / lam);
        p.swap(next);
        w *= lam * t / (k + 1);
    }
    return out;
}

} // namespace

TEST_CASE("single lineage occupancy and holding time") {
    const Geography geo = Geography::cycle(1);
    const LineageDynamics dyn(MigrationKernel::zero(geo), SeedBankProfile::single(1.0, 1.0), Model::M1);
    Rng rng(3);
    Lineage l;
    double active = 0.0, total = 0.0;
    RunningStats hold;
    for (int i = 0; i < 40000; ++i) {
        const bool was_active = l.state.active();
        const LineageStep s = step_lineage(l, dyn, rng);
        if (was_active) {
            active += s.elapsed;
            hold.add(s.elapsed);
        }
        total += s.elapsed;
        l = s.lineage;
    }
    CHECK(active / total == doctest::Approx(0.5).epsilon(0.03));
    CHECK(std::abs(hold.mean() - 1.0) < 4.0 * hold.standard_error());

    const auto k = build_kernel(Geography::torus(1, 3), NearestNeighbour{0.5});
    const LineageDynamics dyn2(k, SeedBankProfile::single(2.0, 1.0), Model::M1);
    CHECK(dyn2.exit_rate(ActivityState::Active()) == doctest::Approx(1.0 + 2.0));
}

TEST_CASE("three-state occupancy matches the stationary vector") {
    // A -> D_m at rate K_m e_m, D_m -> A at rate e_m: pi(D_m) / pi(A) = K_m
    const auto prof = SeedBankProfile::explicit_profile({1.0, 0.5}, {1.0, 0.25});
    const LineageDynamics dyn(MigrationKernel::zero(Geography::cycle(1)), prof, Model::M2);
    Rng rng(8);
    Lineage l;
    std::array<double, 3> occ{};
    for (int i = 0; i < 100000; ++i) {
        const int idx = l.state.colour + 1;
        const LineageStep s = step_lineage(l, dyn, rng);
        occ[static_cast<std::size_t>(idx)] += s.elapsed;
        l = s.lineage;
    }
    const double tot = occ[0] + occ[1] + occ[2];
    CHECK(occ[0] / tot == doctest::Approx(1.0 / 2.5).epsilon(0.03));
    CHECK(occ[1] / tot == doctest::Approx(1.0 / 2.5).epsilon(0.03));
    CHECK(occ[2] / tot == doctest::Approx(0.5 / 2.5).epsilon(0.05));
}

TEST_CASE("coalescence of two pinned active lineages is exponential") {
    const Geography geo = Geography::cycle(1);
    const LineageDynamics dyn(MigrationKernel::zero(geo), SeedBankProfile::single(1e-12, 1.0), Model::M1);
    const double d = 2.0;
    std::vector<double> times;
    for (std::size_t r = 0; r < 2000; ++r) {
        Rng rng = make_rng(1, r, "dual");
        const auto h = run_coalescent({{0, ActivityState::Active(), 0, true}, {0, ActivityState::Active(), 1, true}}, dyn, d, 100.0, rng);
        double t = 100.0;
        for (const auto& e : h.events)
            if (e.type == EventType::Coalesce) t = e.t;
        times.push_back(t);
    }
    const KsResult ks = ks_one_sample(times, [d](double t) { return t <= 0 ? 0.0 : 1.0 - std::exp(-d * t); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("without coalescence the partition stays discrete") {
    const auto k = build_kernel(Geography::torus(1, 2), NearestNeighbour{0.5});
    const LineageDynamics dyn(k, SeedBankProfile::single(1.0, 1.0), Model::M1);
    Rng rng(4);
    const auto h = run_coalescent({{0, {}, 0, true}, {0, {}, 1, true}, {1, {}, 2, true}}, dyn, 0.0, 50.0, rng);
    CHECK(h.partition.size() == 3);
}

TEST_CASE("two lineages on two sites: coalescence probability against the master equation") {
    // states (site1, act1, site2, act2) -> 16 ordered pairs, plus one absorbing state
    const LineageDynamics dyn(build_kernel(Geography::torus(1, 1), NearestNeighbour{0.5}), SeedBankProfile::single(1.0, 1.0), Model::M1);
    const double d = 1.0;
    auto idx = [](int s1, int a1, int s2, int a2) { return ((s1 * 2 + a1) * 2 + s2) * 2 + a2; };
    std::vector<std::vector<double>> Q(17, std::vector<double>(17, 0.0));
    for (int s1 = 0; s1 < 2; ++s1)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int s2 = 0; s2 < 2; ++s2)
                for (int a2 = 0; a2 < 2; ++a2) {
                    const int i = idx(s1, a1, s2, a2);
                    auto add = [&](int j, double r) {
                        Q[i][j] += r;
                        Q[i][i] -= r;
                    };
                    // a = 1 means active; migration rate 1 to the other site, sleep 1, wake 1
                    if (a1) add(idx(1 - s1, a1, s2, a2), 1.0), add(idx(s1, 0, s2, a2), 1.0);
                    else add(idx(s1, 1, s2, a2), 1.0);
                    if (a2) add(idx(s1, a1, 1 - s2, a2), 1.0), add(idx(s1, a1, s2, 0), 1.0);
                    else add(idx(s1, a1, s2, 1), 1.0);
                    if (a1 && a2 && s1 == s2) add(16, d);
                }
    std::vector<double> p0(17, 0.0);
    p0[static_cast<std::size_t>(idx(0, 1, 1, 1))] = 1.0;
    const double exact = evolve(Q, p0, 1.0)[16];

    RunningStats hit;
    for (std::size_t r = 0; r < 20000; ++r) {
        Rng rng = make_rng(2, r, "dual");
        const auto h = run_coalescent({{0, ActivityState::Active(), 0, true}, {1, ActivityState::Active(), 1, true}}, dyn, d, 1.0, rng);
        hit.add(h.partition.size() == 1 ? 1.0 : 0.0);
    }
    CHECK(std::abs(hit.mean() - exact) < 4.0 * hit.standard_error());
}

TEST_CASE("hazard of permanently joint lineages equals T") {
    const LineageDynamics dyn(MigrationKernel::zero(Geography::cycle(1)), SeedBankProfile::single(1e-12, 1.0), Model::M1);
    HazardOptions o;
    o.replicas = 10;
    const auto h = estimate_hazard({0, ActivityState::Active()}, {0, ActivityState::Active()}, dyn, 7.0, o);
    CHECK(h.hazard == doctest::Approx(7.0).epsilon(1e-6));
}

TEST_CASE("finite torus hazard grows with slope 1/(kappa |G|)") {
    const auto k = build_kernel(Geography::torus(1, 2), NearestNeighbour{0.5});
    const LineageDynamics dyn(k, SeedBankProfile::single(1.0, 1.0), Model::M1);
    HazardOptions o;
    o.replicas = 2000;
    const auto h = estimate_hazard({0, ActivityState::Active()}, {0, ActivityState::Active()}, dyn, 400.0, o);
    CHECK(h.slope == doctest::Approx(1.0 / 16.0).epsilon(0.1));
    CHECK_FALSE(h.plateau);
}

TEST_CASE("first-moment duality") {
    const Geography geo = Geography::torus(1, 1);
    const auto k = build_kernel(geo, NearestNeighbour{0.5});
    const auto prof = SeedBankProfile::explicit_profile({1.0, 0.5}, {1.0, 0.5});
    const SystemParams p{Model::M2, k, prof, DiffusionFunction::fisher_wright(1.0), {}};
    const LineageDynamics dyn(k, prof, Model::M2);

    SystemState s0 = SystemState::constant(Model::M2, geo.size(), 2, 0.0);
    s0.x = {0.9, 0.1};
    s0.dormant(0, 0) = 0.2;
    s0.dormant(1, 0) = 0.6;
    s0.dormant(0, 1) = 0.5;
    s0.dormant(1, 1) = 0.3;
    const std::vector<double> field = state_field(s0);

    CHECK(moment_dual_expectation(field, dyn, 0.0, {1, ActivityState::Dormant(0)}).value == doctest::Approx(0.6));
    const std::vector<double> flat(field.size(), 0.42);
    CHECK(moment_dual_expectation(flat, dyn, 3.0, {0, ActivityState::Active()}).value == doctest::Approx(0.42));

    RunOptions o;
    o.horizon = 1.0;
    std::vector<RunningStats> st(field.size());
    for (std::size_t r = 0; r < 2000; ++r) {
        Rng rng = make_rng(6, r, "noise");
        const Trajectory tr = run(s0, p, o, rng);
        const std::vector<double> z = state_field(tr.final_state);
        for (std::size_t u = 0; u < z.size(); ++u) st[u].add(z[u]);
    }
    for (std::size_t u = 0; u < field.size(); ++u) {
        const double dual = moment_dual_expectation(field, dyn, 1.0, dual_state_from_index(u, 2)).value;
        CHECK(std::abs(st[u].mean() - dual) < 4.0 * st[u].standard_error() + 1e-3);
    }
}
