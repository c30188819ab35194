// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; with none, all twelve run in order.
#include "seedbank/commands.hpp"
#include "seedbank/config.hpp"
#include "seedbank/criteria.hpp"
#include "seedbank/dual.hpp"
#include "seedbank/experiments.hpp"
#include "seedbank/forward_sde.hpp"
#include "seedbank/output.hpp"
#include "seedbank/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <numeric>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace seedbank;
namespace fs = std::filesystem;

namespace {

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    ExperimentSpec s;
    s.ladder = {8};
    s.theta = 0.3;
    s.threads = worker_count();
    const SystemParams p = ladder_params(s, 8);
    const std::size_t R = 2000;
    std::vector<double> final(R);
    parallel_for(R, s.threads, [&](std::size_t r) {
        Rng rng = make_rng(101, r, "noise");
        RunOptions o;
        o.horizon = 10.0;
        o.observe = {10.0};
        final[r] = run(SystemState::for_params(p, 0.3), p, o, rng).records.back().theta_hat;
    });
    const MeanSE m = mean_se(final);
    const double z = std::abs(m.mean - 0.3) / m.se;
    return {z <= 4.0, fmt("mean theta_hat(10) = %.5f, SE %.5f, |diff|/SE = %.2f (limit 4)", m.mean, m.se, z)};
}

// ---------------------------------------------------------------------------

Outcome ac2() {
    const auto prof = SeedBankProfile::polynomial({1.0, 0.5, 1.0, 1.0}, 64);
    const LineageDynamics dyn(MigrationKernel::zero(Geography::cycle(1)), prof, Model::M2);
    Rng rng = make_rng(102, 0, "dual");
    Lineage l;
    std::vector<double> act, tot;
    double a = 0.0, t = 0.0;
    while (act.size() < 10000) {
        const bool was_active = l.state.active();
        const LineageStep s = step_lineage(l, dyn, rng);
        if (was_active) a += s.elapsed;
        t += s.elapsed;
        l = s.lineage;
        if (l.state.active() && !was_active) { // a cycle ends on waking up
            act.push_back(a);
            tot.push_back(t);
            a = t = 0.0;
        }
    }
    // ratio estimator with a delta-method standard error
    const double A = std::accumulate(act.begin(), act.end(), 0.0);
    const double T = std::accumulate(tot.begin(), tot.end(), 0.0);
    const double R = A / T;
    RunningStats resid;
    for (std::size_t k = 0; k < act.size(); ++k) resid.add(act[k] - R * tot[k]);
    const double se = resid.stddev() / std::sqrt(double(act.size())) / (T / double(act.size()));
    const double f = summarize(prof).f;
    const double z = std::abs(R - f) / se;
    return {z <= 4.0, fmt("active fraction %.5f vs f_M = %.5f, SE %.5f, |diff|/SE = %.2f", R, f, se, z)};
}

// ---------------------------------------------------------------------------

Outcome ac3() {
    // Fit window [10, M^beta / (10 B)]: the range on which the truncated mixture
    // still follows its power law.
    struct Case {
        double alpha, beta;
    };
    const int M = 4096;
    const std::size_t N = 1000000;
    bool ok = true;
    std::string detail;
    for (const Case c : {Case{0.5, 1.0}, Case{1.0, 1.0}, Case{0.0, 2.0}}) {
        const auto prof = SeedBankProfile::polynomial({1.0, c.alpha, 1.0, c.beta}, M);
        const double gamma = *prof.gamma();
        const ExchangeSampler s(prof);
        std::vector<double> tau(N);
        Rng rng = make_rng(103, static_cast<std::uint64_t>(c.alpha * 10 + c.beta), "wake");
        for (auto& v : tau) v = s.sample_wake_up(rng);
        std::sort(tau.begin(), tau.end());
        const double lo = 10.0, hi = std::pow(M, c.beta) / 10.0;
        std::vector<double> lx, ly, ex;
        for (int k = 0; k < 30; ++k) {
            const double t = lo * std::pow(hi / lo, k / 29.0);
            const auto above = static_cast<double>(tau.end() - std::upper_bound(tau.begin(), tau.end(), t));
            if (above < 10) continue;
            lx.push_back(std::log(t));
            ly.push_back(std::log(above / double(N)));
            ex.push_back(std::log(wake_up_survival(prof, t)));
        }
        const double fitted = -fit_line(lx, ly).slope;
        const double exact = -fit_line(lx, ex).slope;
        const bool pass = std::abs(fitted - gamma) <= 0.1;
        ok = ok && pass;
        detail += fmt("(a=%g,b=%g) fitted %.3f exact-law %.3f target %.3f%s; ", c.alpha, c.beta, fitted, exact, gamma, pass ? "" : " [out]");
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome ac4() {
    const Geography geo = Geography::torus(1, 2);
    const auto k = build_kernel(geo, NearestNeighbour{0.5});
    const auto prof = SeedBankProfile::explicit_profile({1.0, 0.5}, {1.0, 0.5});
    const SystemParams p{Model::M2, k, prof, DiffusionFunction::fisher_wright(1.0), {}};
    const LineageDynamics dyn(k, prof, Model::M2);
    SystemState s0 = SystemState::constant(Model::M2, geo.size(), 2, 0.0);
    s0.x = {0.9, 0.2, 0.5, 0.7};
    for (std::size_t i = 0; i < 4; ++i) {
        s0.dormant(i, 0) = 0.1 + 0.2 * static_cast<double>(i);
        s0.dormant(i, 1) = 0.8 - 0.15 * static_cast<double>(i);
    }
    const std::vector<double> z0 = state_field(s0);
    const std::size_t U = z0.size();
    const double t = 2.0;
    const std::size_t R = 5000;
    std::vector<std::vector<double>> finals(R);
    parallel_for(R, worker_count(), [&](std::size_t r) {
        Rng rng = make_rng(104, r, "noise");
        RunOptions o;
        o.horizon = t;
        finals[r] = state_field(run(s0, p, o, rng).final_state);
    });

    int worst_u = -1;
    double worst = 0.0;
    int compared = 0, failed = 0;
    auto check = [&](double forward_mean, double se, double dual) {
        const double z = std::abs(forward_mean - dual) / se;
        ++compared;
        if (z > 4.0) ++failed;
        if (z > worst) {
            worst = z;
            worst_u = compared;
        }
    };
    for (std::size_t u = 0; u < U; ++u) {
        std::vector<double> v(R);
        for (std::size_t r = 0; r < R; ++r) v[r] = finals[r][u];
        const MeanSE m = mean_se(v);
        check(m.mean, m.se, moment_dual_expectation(z0, dyn, t, dual_state_from_index(u, 2)).value);
    }
    const std::vector<std::pair<DualState, DualState>> pairs{
        {{0, ActivityState::Active()}, {0, ActivityState::Active()}},
        {{0, ActivityState::Active()}, {1, ActivityState::Active()}},
        {{0, ActivityState::Active()}, {2, ActivityState::Dormant(0)}},
        {{1, ActivityState::Dormant(1)}, {3, ActivityState::Active()}},
        {{2, ActivityState::Dormant(0)}, {2, ActivityState::Dormant(1)}},
        {{3, ActivityState::Dormant(1)}, {3, ActivityState::Dormant(1)}}};
    for (const auto& [a, b] : pairs) {
        const std::size_t ia = dual_state_index(a, 2), ib = dual_state_index(b, 2);
        std::vector<double> v(R);
        for (std::size_t r = 0; r < R; ++r) v[r] = finals[r][ia] * finals[r][ib];
        const MeanSE m = mean_se(v);
        check(m.mean, m.se, second_moment_dual(z0, dyn, 1.0, t, a, b).value);
    }
    return {failed == 0, fmt("%d moments compared (12 first, 6 second), %d beyond 4 SE, largest |diff|/SE = %.2f (#%d)", compared,
                             failed, worst, worst_u)};
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6 share the 3-D torus F g estimate.

struct FgRun {
    bool done = false;
    FgTable fw, ok;
    double bhat = 0.0, bhat_se = 0.0;
    double seconds_fw = 0.0;
};

ExperimentSpec ac5_spec() {
    ExperimentSpec s;
    s.dimension = 3;
    s.ladder = {6};
    s.seed = 105;
    s.threads = worker_count();
    return s;
}

FgRun& fg_run() {
    static FgRun run;
    if (run.done) return run;
    const ExperimentSpec s = ac5_spec();
    const auto start = std::chrono::steady_clock::now();
    const SystemParams p = ladder_params(s, 6);
    const LineageDynamics dyn(p.kernel, p.profile, p.model);
    HazardOptions ho;
    ho.replicas = 5000;
    ho.seed = 105;
    ho.threads = s.threads;
    const HazardEstimate h = estimate_hazard({0, ActivityState::Active()}, {0, ActivityState::Active()}, dyn, 200.0, ho);
    run.bhat = h.intercept;
    run.bhat_se = h.intercept_se;
    FgOptions fo;
    fo.theta_grid = {0.0, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0};
    fo.replicas = 24;
    fo.bhat = run.bhat;
    run.fw = estimate_Fg(s, fo);
    run.seconds_fw = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ExperimentSpec so = s;
    so.g_kind = DiffusionKind::OhtaKimura;
    fo.replicas = 8;
    fo.bhat.reset();
    run.ok = estimate_Fg(so, fo);
    run.done = true;
    return run;
}

Outcome ac5() {
    const FgRun& r = fg_run();
    std::vector<double> ratio;
    std::string pts;
    for (const FgPoint& p : r.fw.points) {
        if (p.theta <= 0.0 || p.theta >= 1.0) continue;
        const double q = p.fg / (p.theta * (1.0 - p.theta));
        ratio.push_back(q);
        pts += fmt("%.2f:%.4f(+-%.4f) ", p.theta, q, p.se / (p.theta * (1.0 - p.theta)));
    }
    const double mean = std::accumulate(ratio.begin(), ratio.end(), 0.0) / double(ratio.size());
    const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
    const double spread = (*hi - *lo) / mean;
    const double target = 1.0 / (1.0 + r.bhat);
    const double rel = std::abs(mean - target) / target;
    const bool pass = spread <= 0.10 && rel <= 0.15 && r.seconds_fw <= 1800.0;
    return {pass, fmt("F g/(theta(1-theta)) = %s; spread %.1f%% (limit 10%%); mean %.4f vs 1/(1+Bhat) = %.4f (Bhat %.4f +- %.4f), "
                      "diff %.1f%% (limit 15%%); %.0f s",
                      pts.c_str(), 100 * spread, mean, target, r.bhat, r.bhat_se, 100 * rel, r.seconds_fw)};
}

Outcome ac6() {
    const FgRun& r = fg_run();
    bool ok = true;
    std::string detail;
    for (const auto& [name, table] : {std::pair{"FW", &r.fw}, std::pair{"OK", &r.ok}}) {
        double end = 0.0, inner = std::numeric_limits<double>::infinity();
        for (const FgPoint& p : table->points) {
            if (p.theta <= 0.0 || p.theta >= 1.0) end = std::max(end, std::abs(p.fg));
            else inner = std::min(inner, p.fg);
        }
        ok = ok && end < 1e-3 && inner > 0.0;
        detail += fmt("%s: max endpoint %.2e, min interior %.4g; ", name, end, inner);
    }
    double ratio = 0.0;
    int n = 0;
    for (const FgPoint& p : r.fw.points)
        if (p.theta > 0.0 && p.theta < 1.0) {
            ratio += p.fg / (p.theta * (1.0 - p.theta));
            ++n;
        }
    ratio /= n;
    ok = ok && ratio < 1.0 && renormalize_fw(1.0, r.bhat) < 1.0;
    detail += fmt("d* estimate %.4f (< d = 1), d/(1+d Bhat) = %.4f", ratio, renormalize_fw(1.0, std::max(0.0, r.bhat)));
    return {ok, detail};
}

// ---------------------------------------------------------------------------

Outcome ac7() {
    int checked = 0, wrong = 0;
    std::string misses;
    auto expect = [&](const CriterionExample& ex, Verdict v) {
        ++checked;
        const Verdict got = classify_example(ex).verdict;
        if (got != v) {
            ++wrong;
            misses += example_name(ex) + " ";
        }
    };
    auto threshold = [&](const CriterionExample& ex, double t) {
        ++checked;
        const double got = classify_example(ex).parameters.at("gamma_threshold");
        if (!(std::isinf(t) ? got >= 1.0 : std::abs(got - t) < 1e-12)) {
            ++wrong;
            misses += "threshold ";
        }
    };
    const double h = 1e-3;
    // Euclidean: d=3 coexists for every gamma in (0,1]; d=2 below 1; d=1 below 2/3
    for (double g : {0.05, 0.5, 1.0}) expect(EuclideanExample{3, g}, Verdict::Coexistence);
    expect(EuclideanExample{2, 1.0 - h}, Verdict::Coexistence);
    expect(EuclideanExample{2, 1.0}, Verdict::Clustering);
    expect(EuclideanExample{1, 2.0 / 3.0 - h}, Verdict::Coexistence);
    expect(EuclideanExample{1, 2.0 / 3.0 + h}, Verdict::Clustering);
    expect(EuclideanExample{1, 1.0}, Verdict::Clustering);
    threshold(EuclideanExample{2, 0.5}, 1.0);
    threshold(EuclideanExample{1, 0.5}, 2.0 / 3.0);
    // heavy tails: q < 1 coexists for every gamma; q = 1 below 1; q > 1 below q/(2q-1)
    for (double q : {0.3, 0.8, 0.99})
        for (double g : {0.1, 0.7, 1.0}) expect(HeavyTailExample{q, g}, Verdict::Coexistence);
    expect(HeavyTailExample{1.0, 1.0 - h}, Verdict::Coexistence);
    expect(HeavyTailExample{1.0, 1.0}, Verdict::Clustering);
    for (double q : {1.2, 1.5, 1.9}) {
        const double t = q / (2 * q - 1);
        expect(HeavyTailExample{q, t - h}, Verdict::Coexistence);
        expect(HeavyTailExample{q, t + h}, Verdict::Clustering);
        threshold(HeavyTailExample{q, 0.5}, t);
    }
    // hierarchical: log N log(Kc) > log c log(K^2 e), checked against a direct evaluation
    Rng rng(107);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double N = 2.0 + std::floor(8.0 * U(rng));
        const double c = 0.05 + (N - 0.1) * U(rng);
        const double K = 1.0 + 3.0 * U(rng);
        const double e = std::min(N / K, N) * (0.02 + 0.96 * U(rng));
        const double lhs = std::log(N) * std::log(K * c), rhs = std::log(c) * std::log(K * K * e);
        if (std::abs(lhs - rhs) < 1e-9) continue;
        expect(HierarchicalExample{N, c, K, e}, lhs > rhs ? Verdict::Coexistence : Verdict::Clustering);
    }
    // K c = 1, K > 1, K e^2 > 1: coexistence for every N
    for (double N : {2.0, 5.0, 50.0}) expect(HierarchicalExample{N, 0.5, 2.0, 0.9}, Verdict::Coexistence);
    return {wrong == 0, fmt("%d table entries checked, %d mismatches %s", checked, wrong, misses.c_str())};
}

// ---------------------------------------------------------------------------
// Criteria 8 and 9 share the heavy-tail ladder.

ExperimentSpec ladder_spec() {
    ExperimentSpec s;
    s.ladder = {4, 8, 16};
    s.kernel = HeavyTail{0.5, 0.8};
    s.kernel_options.shell_cap = 1 << 22;
    s.theta = 0.3;
    s.replicas = 1000;
    s.s_grid = {1.0};
    s.seed = 108;
    s.threads = worker_count();
    return s;
}

struct LadderShared {
    bool done = false;
    double bhat = 0.0, bhat_se = 0.0, dstar = 0.0;
};

LadderShared& ladder_shared() {
    static LadderShared l;
    if (l.done) return l;
    const ExperimentSpec s = ladder_spec();
    const SystemParams p = ladder_params(s, 16);
    const LineageDynamics dyn(p.kernel, p.profile, p.model);
    HazardOptions ho;
    ho.replicas = 5000;
    ho.seed = 108;
    ho.threads = s.threads;
    const HazardEstimate h = estimate_hazard({0, ActivityState::Active()}, {0, ActivityState::Active()}, dyn, 400.0, ho);
    l.bhat = h.intercept;
    l.bhat_se = h.intercept_se;
    l.dstar = renormalize_fw(1.0, std::max(0.0, h.intercept));
    l.done = true;
    return l;
}

Outcome ac8() {
    const ExperimentSpec s = ladder_spec();
    const LadderShared& l = ladder_shared();
    const FssResult r = finite_systems_run(s);
    ReferenceOptions ro;
    ro.replicas = 1000;
    ro.seed = 108;
    ro.threads = s.threads;
    const double dstar = l.dstar;
    const ReferenceEnsemble ref = fg_diffusion_reference([dstar](double t) { return dstar * t * (1 - t); }, s.theta, {1.0}, ro);
    auto column = [](const std::vector<std::vector<double>>& paths) {
        std::vector<double> v;
        for (const auto& p : paths) v.push_back(p[0]);
        return snap_to_traps(v);
    };
    const auto x8 = column(r.entries[1].theta_hat), x16 = column(r.entries[2].theta_hat), xr = column(ref.paths);
    const KsResult a = ks_two_sample(x8, x16), b = ks_two_sample(x8, xr), c = ks_two_sample(x16, xr);
    const bool pass = a.p_value > 0.01 && b.p_value > 0.01 && c.p_value > 0.01;
    return {pass, fmt("Bhat %.4f +- %.4f, d* %.4f; KS p-values: n8 vs n16 %.3f, n8 vs ref %.3f, n16 vs ref %.3f (reject below 0.01)", l.bhat,
                      l.bhat_se, dstar, a.p_value, b.p_value, c.p_value)};
}

Outcome ac9() {
    const ExperimentSpec s = ladder_spec();
    const LadderShared& l = ladder_shared();
    TrappingOptions to;
    to.replicas = 400;
    const TrappingResult tr = trapping_time(s, to);
    ReferenceOptions ro;
    ro.replicas = 2000;
    ro.seed = 109;
    ro.threads = s.threads;
    ro.hitting_horizon = to.horizon;
    const double dstar = l.dstar;
    const ReferenceEnsemble ref = fg_diffusion_reference([dstar](double t) { return dstar * t * (1 - t); }, s.theta, {0.0}, ro);
    const double m8 = tr.entries[1].median, m16 = tr.entries[2].median, mr = median(ref.hitting);
    const double ladder_rel = std::abs(m8 - m16) / m16;
    const double ref_rel = std::abs(m16 - mr) / mr;
    const bool pass = ladder_rel <= 0.25 && ref_rel <= 0.25;
    return {pass, fmt("median H/beta: n4 %.3f, n8 %.3f, n16 %.3f; reference %.3f; n8 vs n16 %.1f%%, n16 vs reference %.1f%% (limit 25%%); "
                      "censored n16 %.1f%%",
                      tr.entries[0].median, m8, m16, mr, 100 * ladder_rel, 100 * ref_rel, 100 * tr.entries[2].censored_fraction)};
}

// ---------------------------------------------------------------------------

// Duality: the pair diagnostic over a layer set equals theta(1-theta) times the chance
// that two dual lineages started at a uniform pair of distinct (site, layer) cells have
// not coalesced by t. Used to tell simulator error apart from the finite-n law itself.
double dual_noncoalescence(const ExperimentSpec& s, int last_layer, double t, std::size_t pairs) {
    const SystemParams p = ladder_params(s, s.ladder.back());
    const LineageDynamics dyn(p.kernel, p.profile, p.model);
    const auto S = static_cast<std::uint64_t>(p.kernel.geography().size());
    const auto layers = static_cast<std::uint64_t>(last_layer + 1);
    auto cell = [](int layer) { return layer == 0 ? ActivityState::Active() : ActivityState::Dormant(layer - 1); };
    std::size_t apart = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        Rng rng = make_rng(s.seed, k, "ac10-dual");
        std::uint64_t a = 0, b = 0;
        do {
            a = rng() % (S * layers);
            b = rng() % (S * layers);
        } while (a == b);
        std::vector<Lineage> in{{static_cast<Site>(a % S), cell(static_cast<int>(a / S)), 0, true},
                                {static_cast<Site>(b % S), cell(static_cast<int>(b / S)), 1, true}};
        CoalescentOptions o;
        o.record_events = false;
        if (run_coalescent(std::move(in), dyn, 1.0, t, rng, o).partition.size() == 2) ++apart;
    }
    return static_cast<double>(apart) / static_cast<double>(pairs);
}

Outcome ac10() {
    ExperimentSpec s;
    s.ladder = {4};
    s.bank = PolynomialBank{1.0, 0.5, 1.0, 2.0};
    s.M = MRule{MRule::Kind::Constant, 80.0, 1.0};
    s.model = Model::M2;
    s.theta = 0.3;
    s.seed = 110;
    s.threads = worker_count();
    const auto start = std::chrono::steady_clock::now();
    const TimeScaleReport ts = time_scales(ladder_geography(s, 4), ladder_profile(s, 4), s.model);
    const double mid = 10.0 * *ts.beta_2star, late = 3.0 * *ts.beta_star;
    ClusteringOptions co;
    co.probe_times = {mid, late};
    co.replicas = 100;
    const ClusteringReport rep = clustering_diagnostics(s, co);
    const ClusteringProbe& a = rep.probes[0];
    const ClusteringProbe& b = rep.probes[1];
    const double v0 = s.theta * (1 - s.theta);
    const double dual_shallow = v0 * dual_noncoalescence(s, a.L + 1, mid, 2000);
    const double dual_full = v0 * dual_noncoalescence(s, ladder_profile(s, 4).M() + 1, late, 2000);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double tol = 0.05 * v0;
    const bool shallow = a.shallow.mean < tol;
    const bool deep = std::abs(a.deep_mean.mean - s.theta) <= 4.0 * a.deep_mean.se;
    const bool ups = std::abs(a.upsilon_frequency - s.theta) <= 4.0 * a.upsilon_se;
    const bool full = b.full.mean < tol;
    const bool pass = shallow && deep && ups && full && secs <= 3600.0 && *ts.beta_star / *ts.beta_2star >= 10.0;
    return {pass, fmt("beta* %.0f, beta** %.0f; t=%.0f (L=%d): shallow %.2e (limit %.2e, exact dual %.2e)%s, deep mean %.4f +- %.4f%s, "
                      "Upsilon freq %.3f +- %.3f%s; t=%.0f: full %.2e (exact dual %.2e)%s; psi %.2f (warning %s); %.0f s",
                      *ts.beta_star, *ts.beta_2star, a.t, a.L, a.shallow.mean, tol, dual_shallow, shallow ? "" : " [out]", a.deep_mean.mean,
                      a.deep_mean.se, deep ? "" : " [out]", a.upsilon_frequency, a.upsilon_se, ups ? "" : " [out]", b.t, b.full.mean, dual_full,
                      full ? "" : " [out]", rep.psi, rep.psi_warning ? "yes" : "no", secs)};
}

// ---------------------------------------------------------------------------

Outcome ac11() {
    RenewalOptions o;
    o.seed = 111;
    o.threads = worker_count();
    bool ok = true;
    std::string d;
    for (double g : {0.7, 0.8, 0.9}) {
        const RenewalResult r = renewal_intersection_exponent(g, o);
        const bool pass = std::abs(r.fitted - r.target) <= 0.1;
        ok = ok && pass;
        d += fmt("gamma %.1f: fitted %.3f +- %.3f vs %.1f%s; ", g, r.fitted, r.fitted_se, r.target, pass ? "" : " [out]");
    }
    return {ok, d};
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome ac12() {
    const fs::path root = fs::temp_directory_path() / "seedbank_acceptance_determinism";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs{
        {"forward", R"({"geography": {"n": 8}, "initial": {"theta": 0.3}, "forward": {"replicas": 64, "horizon": 5}})"},
        {"dual", R"({"geography": {"dimension": 2, "n": 3}, "seedbank": {"K": [1, 0.5], "e": [1, 0.5]}, "model": "M2",
                    "dual": {"replicas": 32, "horizon": 30, "hazard": {"enabled": true, "T": 50, "replicas": 200}}})"},
        {"fss", R"({"ladder": [2, 4], "kernel": {"type": "heavy_tail", "Q": 0.5, "q": 0.8}, "initial": {"theta": 0.3},
                   "fss": {"replicas": 64, "s_grid": [0.5, 1], "tasks": ["paths", "reference", "trapping", "fg"],
                           "fg": {"replicas": 4, "theta_grid": [0.3, 0.6], "bhat": {"source": "dual", "hazard_T": 50, "hazard_replicas": 200}},
                           "reference": {"replicas": 100}, "trapping": {"replicas": 16, "horizon": 5}}})"},
        {"renewal", R"({"renewal": {"gammas": [0.8], "increments": 20000, "horizon": 1e6}})"},
        {"criteria", R"({"criteria": {"examples": [{"type": "euclidean", "d": 1, "gamma": 0.5}],
                        "integrals": [{"return_probability": {"type": "power_law", "c": 1, "a": 1.5}}]}})"}};
    int files = 0;
    std::string diffs;
    std::ostringstream sink;
    for (const auto& [cmd, text] : runs) {
        Config c = parse_config_text(text);
        c.run.seed = 112;
        for (unsigned t : {1u, 8u}) {
            c.run.threads = t;
            apply_overrides(c, std::nullopt, t);
            run_command(cmd, c, root / (cmd + std::to_string(t)), sink);
        }
        for (const auto& entry : fs::directory_iterator(root / (cmd + "1"))) {
            const std::string name = entry.path().filename().string();
            if (name == "manifest.json" || name == "config.resolved.json") continue; // these record the worker count
            ++files;
            if (slurp(entry.path()) != slurp(root / (cmd + "8") / name)) diffs += cmd + "/" + name + " ";
        }
    }
    return {diffs.empty() && files > 10, fmt("%d output files compared between 1 and 8 workers; differing: %s", files,
                                               diffs.empty() ? "none" : diffs.c_str())};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> all{ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10, ac11, ac12};
    // wall-clock limits stated with the criteria, in seconds (0: none stated)
    const std::vector<double> limit{120, 30, 120, 300, 1800, 0, 0, 3600, 0, 3600, 600, 0};
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (int k = 1; k <= 12; ++k) {
        if (!pick.empty() && !pick.count(k)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[static_cast<std::size_t>(k - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double lim = limit[static_cast<std::size_t>(k - 1)];
        if (lim > 0 && secs > lim) {
            o.pass = false;
            o.detail += fmt(" [runtime %.0f s over the %.0f s limit]", secs, lim);
        }
        std::cout << "AC" << k << " " << (o.pass ? "PASS" : "FAIL") << " (" << fmt("%.1f s", secs) << "): " << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
