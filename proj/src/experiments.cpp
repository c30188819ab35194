#include "seedbank/experiments.hpp"
#include "seedbank/errors.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace seedbank {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string label(const char* prefix, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.17g", prefix, v);
    return buf;
}

const PolynomialBank* polynomial_of(const SeedBankProfile& p) { return std::get_if<PolynomialBank>(&p.provenance()); }

double dt_for(const ExperimentSpec& spec, const EulerMaruyama& em) { return spec.dt > 0.0 ? spec.dt : em.default_dt(); }

// Sums for a quadratic least-squares fit y ~ c0 + c1 u + c2 u^2.
struct QuadSums {
    double s[5] = {0, 0, 0, 0, 0};
    double t[3] = {0, 0, 0};
    void add(double u, double y) {
        double p = 1.0;
        for (int k = 0; k < 5; ++k) {
            if (k < 3) t[k] += p * y;
            s[k] += p;
            p *= u;
        }
    }
    QuadSums& operator+=(const QuadSums& o) {
        for (int k = 0; k < 5; ++k) s[k] += o.s[k];
        for (int k = 0; k < 3; ++k) t[k] += o.t[k];
        return *this;
    }
    QuadSums& operator-=(const QuadSums& o) {
        for (int k = 0; k < 5; ++k) s[k] -= o.s[k];
        for (int k = 0; k < 3; ++k) t[k] -= o.t[k];
        return *this;
    }
    // Fitted value at u = 0; falls back to the mean when u hardly varies.
    double intercept() const {
        if (s[0] <= 0.0) return kNaN;
        const double mu = s[1] / s[0];
        const double var = s[2] / s[0] - mu * mu;
        if (!(var > 1e-12)) return t[0] / s[0];
        Eigen::Matrix3d A;
        A << s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4];
        const Eigen::Vector3d b(t[0], t[1], t[2]);
        const Eigen::Vector3d c = A.ldlt().solve(b);
        if (!c.allFinite()) return t[0] / s[0];
        return c(0);
    }
};

// Jackknife over replicas of the intercept of the pooled fit.
MeanSE jackknife_intercept(const std::vector<QuadSums>& per_replica) {
    QuadSums total;
    for (const auto& q : per_replica) total += q;
    MeanSE out;
    out.mean = total.intercept();
    out.count = per_replica.size();
    const std::size_t R = per_replica.size();
    if (R < 2) return out;
    std::vector<double> loo(R);
    double avg = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        QuadSums q = total;
        q -= per_replica[r];
        loo[r] = q.intercept();
        avg += loo[r];
    }
    avg /= static_cast<double>(R);
    double ss = 0.0;
    for (double v : loo) ss += (v - avg) * (v - avg);
    out.se = std::sqrt(ss * static_cast<double>(R - 1) / static_cast<double>(R));
    return out;
}

MeanSE jackknife_difference(const std::vector<QuadSums>& a, const std::vector<QuadSums>& b) {
    QuadSums ta, tb;
    for (const auto& q : a) ta += q;
    for (const auto& q : b) tb += q;
    MeanSE out;
    out.mean = ta.intercept() - tb.intercept();
    const std::size_t R = a.size();
    out.count = R;
    if (R < 2) return out;
    std::vector<double> loo(R);
    double avg = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        QuadSums qa = ta, qb = tb;
        qa -= a[r];
        qb -= b[r];
        loo[r] = qa.intercept() - qb.intercept();
        avg += loo[r];
    }
    avg /= static_cast<double>(R);
    double ss = 0.0;
    for (double v : loo) ss += (v - avg) * (v - avg);
    out.se = std::sqrt(ss * static_cast<double>(R - 1) / static_cast<double>(R));
    return out;
}

double median_with_censoring(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t R = v.size();
    if (R % 2 == 1) return v[R / 2];
    const double a = v[R / 2 - 1], b = v[R / 2];
    if (std::isinf(a) || std::isinf(b)) return kInf;
    return 0.5 * (a + b);
}

void check_grid(const std::vector<double>& g, const char* what) {
    if (g.empty()) throw std::invalid_argument(std::string(what) + " must not be empty");
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(g[k] >= 0.0) || !std::isfinite(g[k])) throw std::invalid_argument(std::string(what) + " entries must be finite and >= 0");
        if (k > 0 && !(g[k] > g[k - 1])) throw std::invalid_argument(std::string(what) + " must be strictly increasing");
    }
}

} // namespace

// ---------------------------------------------------------------------------

std::string regime_name(GrowthRegime r) {
    switch (r) {
    case GrowthRegime::I: return "I";
    case GrowthRegime::II: return "II";
    case GrowthRegime::Critical: return "critical";
    default: return "not_applicable";
    }
}

TimeScaleReport time_scales(const Geography& geo, const SeedBankProfile& profile, Model /*model*/) {
    TimeScaleReport r;
    r.sites = geo.size();
    r.M = profile.M();
    const SeedBankSummary s = summarize(profile);
    r.kappa = s.kappa;
    r.beta_n = s.kappa * static_cast<double>(r.sites);
    r.gamma = profile.gamma();
    if (!r.gamma) return r;
    const PolynomialBank* pb = polynomial_of(profile);
    const double g = *r.gamma;
    const double G = static_cast<double>(r.sites);
    r.beta_star = std::pow(static_cast<double>(r.M), pb->beta);
    if (std::abs(g - 0.5) < 1e-12) {
        // beta** = e^{|G|} overflows quickly, so compare logarithms
        r.beta_2star = std::exp(G);
        const double log_ratio = r.M > 0 ? pb->beta * std::log(static_cast<double>(r.M)) - G : -kInf;
        if (log_ratio < std::log(kRegimeBand)) r.regime = GrowthRegime::I;
        else if (log_ratio > -std::log(kRegimeBand)) r.regime = GrowthRegime::II;
        else r.regime = GrowthRegime::Critical;
    } else if (g > 0.5) {
        r.beta_2star = std::pow(G, 1.0 / (2.0 * g - 1.0));
        const double ratio = *r.beta_star / *r.beta_2star;
        if (ratio < kRegimeBand) r.regime = GrowthRegime::I;
        else if (ratio > 1.0 / kRegimeBand) r.regime = GrowthRegime::II;
        else r.regime = GrowthRegime::Critical;
    } else {
        r.beta_2star = kInf;
        r.regime = GrowthRegime::I;
    }
    return r;
}

int MRule::operator()(int n) const {
    if (kind == Kind::Constant) return static_cast<int>(std::llround(value));
    return static_cast<int>(std::max(0LL, std::llround(value * std::pow(static_cast<double>(n), exponent))));
}

std::string time_unit_name(TimeUnit u) {
    switch (u) {
    case TimeUnit::BetaN: return "beta_n";
    case TimeUnit::BetaStar: return "beta_star";
    default: return "absolute";
    }
}

void validate(const ExperimentSpec& spec) {
    if (spec.ladder.empty()) throw std::invalid_argument("ladder must not be empty");
    for (std::size_t k = 0; k < spec.ladder.size(); ++k) {
        if (spec.ladder[k] < 1) throw std::invalid_argument("ladder entries must be >= 1");
        if (k > 0 && spec.ladder[k] <= spec.ladder[k - 1]) throw std::invalid_argument("ladder must be strictly increasing");
    }
    if (!(spec.theta >= 0.0 && spec.theta <= 1.0)) throw std::invalid_argument("theta must lie in [0,1]");
    if (spec.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    check_grid(spec.s_grid, "s_grid");
    if (spec.threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (!(spec.dt >= 0.0)) throw std::invalid_argument("dt must be >= 0");
    if (!(spec.budget > 0.0)) throw std::invalid_argument("budget must be > 0");
    if (spec.M.kind == MRule::Kind::Constant && spec.M.value < 0) throw std::invalid_argument("M must be >= 0");
}

Geography ladder_geography(const ExperimentSpec& spec, int n) {
    return spec.family == GeographyFamily::Torus ? Geography::torus(spec.dimension, n) : Geography::hierarchical(spec.order, n);
}

SeedBankProfile ladder_profile(const ExperimentSpec& spec, int n) {
    if (auto p = std::get_if<PolynomialBank>(&spec.bank)) return SeedBankProfile::polynomial(*p, spec.M(n));
    if (auto h = std::get_if<HierarchicalBank>(&spec.bank)) return SeedBankProfile::hierarchical(*h, spec.M(n));
    return SeedBankProfile::explicit_profile(spec.K, spec.e);
}

DiffusionFunction make_diffusion(const ExperimentSpec& spec) {
    switch (spec.g_kind) {
    case DiffusionKind::FisherWright: return DiffusionFunction::fisher_wright(spec.g_rate);
    case DiffusionKind::OhtaKimura: return DiffusionFunction::ohta_kimura(spec.g_rate);
    default: return DiffusionFunction::custom(spec.g_grid);
    }
}

SystemParams ladder_params(const ExperimentSpec& spec, int n) {
    const Geography geo = ladder_geography(spec, n);
    SystemParams p{spec.model, build_kernel(geo, spec.kernel, spec.kernel_options), ladder_profile(spec, n),
                   make_diffusion(spec), {}, spec.boundary};
    if (spec.model == Model::M3) {
        for (int m = 0; m < p.profile.colours(); ++m) p.displacement.push_back(MigrationKernel::identity(geo));
    }
    validate(p);
    return p;
}

SystemState initial_state(const ExperimentSpec& spec, const SystemParams& params, double theta, Rng& rng) {
    if (spec.initial == InitialLaw::Bernoulli)
        return SystemState::bernoulli(params.model, params.kernel.geography().size(), params.profile.colours(), theta, rng);
    return SystemState::for_params(params, theta);
}

double time_unit_scale(const ExperimentSpec& spec, const TimeScaleReport& scales) {
    switch (spec.unit) {
    case TimeUnit::BetaN: return scales.beta_n;
    case TimeUnit::BetaStar:
        if (!scales.beta_star) throw std::invalid_argument("beta_star time unit needs a polynomial seed-bank with valid gamma");
        return *scales.beta_star;
    default: return 1.0;
    }
}

double projected_cost(const ExperimentSpec& spec, int n, double horizon, std::size_t replicas) {
    const SystemParams p = ladder_params(spec, n);
    const EulerMaruyama em(p);
    const double dt = dt_for(spec, em);
    const double steps = std::ceil(horizon / dt);
    const double sites = static_cast<double>(p.kernel.geography().size());
    const double width = static_cast<double>(p.kernel.support().size()) + 2.0 * p.profile.colours() + 2.0;
    return static_cast<double>(replicas) * steps * sites * width;
}

// ---------------------------------------------------------------------------

FssResult finite_systems_run(const ExperimentSpec& spec) {
    validate(spec);
    struct Plan {
        int n;
        SystemParams params;
        TimeScaleReport scales;
        std::vector<double> times;
        double cost;
    };
    std::vector<Plan> plans;
    for (int n : spec.ladder) {
        SystemParams params = ladder_params(spec, n);
        const TimeScaleReport scales = time_scales(params.kernel.geography(), params.profile, spec.model);
        const double unit = time_unit_scale(spec, scales);
        std::vector<double> times;
        for (double s : spec.s_grid) times.push_back(s * unit);
        const double cost = projected_cost(spec, n, times.back(), spec.replicas);
        if (cost > spec.budget) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "ladder entry n=%d projects %.3g site-steps, above the budget %.3g", n, cost,
                          spec.budget);
            throw BudgetRefusal(buf);
        }
        plans.push_back({n, std::move(params), scales, std::move(times), cost});
    }

    FssResult out;
    for (const Plan& plan : plans) {
        LadderRun entry;
        entry.n = plan.n;
        entry.scales = plan.scales;
        entry.cost = plan.cost;
        entry.times = plan.times;
        const std::size_t R = spec.replicas;
        entry.theta_hat.assign(R, {});
        entry.theta_x.assign(R, {});
        entry.final_moments.assign(R, {});
        const std::string stream = "fss/n=" + std::to_string(plan.n);
        const int depth = plan.params.profile.M();
        parallel_for(R, spec.threads, [&](std::size_t r) {
            Rng rng = make_rng(spec.seed, r, stream);
            SystemState s0 = initial_state(spec, plan.params, spec.theta, rng);
            std::vector<double>& th = entry.theta_hat[r];
            std::vector<double>& tx = entry.theta_x[r];
            if (plan.times.back() <= 0.0) {
                const Macroscopic m = macroscopic(s0, plan.params.profile);
                th.push_back(m.theta_hat);
                tx.push_back(m.theta_x);
                entry.final_moments[r] = diversity_and_depth_moments(s0, depth);
                return;
            }
            EulerMaruyama em(plan.params);
            RunOptions opt;
            opt.horizon = plan.times.back();
            opt.dt = spec.dt;
            opt.observe = plan.times;
            const Trajectory traj = run(std::move(s0), em, opt, rng);
            for (const Observation& o : traj.records) {
                th.push_back(o.theta_hat);
                tx.push_back(o.theta_x);
            }
            entry.final_moments[r] = diversity_and_depth_moments(traj.final_state, depth);
        });
        out.entries.push_back(std::move(entry));
    }
    return out;
}

// ---------------------------------------------------------------------------

double relaxation_time(const MigrationKernel& kernel, const SeedBankProfile& profile) {
    double slow = 0.0;
    for (double e : profile.e()) slow = std::max(slow, 1.0 / e);
    const double gap = spectral_gap(kernel);
    const double mix = std::isfinite(gap) && gap > 0.0 ? 1.0 / gap : 0.0;
    if (gap == 0.0) throw NumericalFailure("kernel has no spectral gap: the walk is not irreducible");
    return std::max(slow, mix);
}

double FgTable::operator()(double theta) const {
    theta = std::clamp(theta, 0.0, 1.0);
    std::vector<std::pair<double, double>> knots;
    knots.emplace_back(0.0, 0.0);
    for (const FgPoint& p : points)
        if (p.theta > 0.0 && p.theta < 1.0) knots.emplace_back(p.theta, std::max(0.0, p.fg));
    knots.emplace_back(1.0, 0.0);
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (theta <= knots[k].first) {
            const auto [x0, y0] = knots[k - 1];
            const auto [x1, y1] = knots[k];
            const double w = x1 > x0 ? (theta - x0) / (x1 - x0) : 0.0;
            return y0 + w * (y1 - y0);
        }
    }
    return 0.0;
}

FgTable estimate_Fg(const ExperimentSpec& spec, const FgOptions& opt) {
    validate(spec);
    if (opt.theta_grid.empty()) throw std::invalid_argument("theta grid must not be empty");
    for (double th : opt.theta_grid)
        if (!(th >= 0.0 && th <= 1.0)) throw std::invalid_argument("theta grid entries must lie in [0,1]");
    if (opt.replicas < 2) throw std::invalid_argument("F g estimation needs at least 2 replicas");
    if (!(opt.sample_interval > 0.0) || !(opt.window_factor > 0.0) || !(opt.burn_in_factor >= 0.0))
        throw std::invalid_argument("F g window parameters must be positive");

    FgTable table;
    table.n = spec.ladder.back();
    const SystemParams params = ladder_params(spec, table.n);
    table.relaxation = opt.relaxation ? *opt.relaxation : relaxation_time(params.kernel, params.profile);
    table.burn_in = opt.burn_in_factor * table.relaxation;
    table.window = opt.window_factor * table.relaxation;
    std::vector<double> times;
    const auto K = static_cast<std::size_t>(std::floor(table.window / opt.sample_interval + 1e-9));
    if (K < 3) throw std::invalid_argument("F g window holds fewer than 4 samples; reduce sample_interval");
    for (std::size_t k = 0; k <= K; ++k) times.push_back(table.burn_in + static_cast<double>(k) * opt.sample_interval);
    if (times.front() <= 0.0) times.front() = 0.0;
    const double horizon = times.back();
    const double cost = projected_cost(spec, table.n, horizon, opt.replicas * opt.theta_grid.size());
    if (cost > spec.budget) throw BudgetRefusal("F g estimation exceeds the budget");

    struct ReplicaSums {
        QuadSums g, v, first, second;
        double raw = 0.0;
    };
    const std::size_t T = opt.theta_grid.size(), R = opt.replicas;
    std::vector<ReplicaSums> sums(T * R);
    parallel_for(T * R, spec.threads, [&](std::size_t job) {
        const std::size_t a = job / R, r = job % R;
        const double theta = opt.theta_grid[a];
        Rng rng = make_rng(spec.seed, r, label("fg/theta", theta));
        SystemState s0 = initial_state(spec, params, theta, rng);
        EulerMaruyama em(params);
        RunOptions ro;
        ro.horizon = horizon;
        ro.dt = spec.dt;
        ro.observe = times;
        ro.snapshots = true;
        const Trajectory traj = run(std::move(s0), em, ro, rng);
        ReplicaSums& out = sums[job];
        const double G = static_cast<double>(params.kernel.geography().size());
        for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
            const SystemState& s = traj.snapshots[k];
            const double th = macroscopic(s, params.profile).theta_hat;
            double gs = 0.0, vs = 0.0;
            for (double x : s.x) {
                gs += params.g(x);
                vs += (x - th) * (x - th);
            }
            gs /= G;
            vs /= G;
            const double u = th - theta;
            out.g.add(u, gs);
            out.v.add(u, vs);
            (2 * k < traj.snapshots.size() ? out.first : out.second).add(u, gs);
            out.raw += gs;
        }
        out.raw /= static_cast<double>(traj.snapshots.size());
    });

    for (std::size_t a = 0; a < T; ++a) {
        std::vector<QuadSums> g(R), v(R), h1(R), h2(R);
        std::vector<double> raw(R);
        for (std::size_t r = 0; r < R; ++r) {
            const ReplicaSums& s = sums[a * R + r];
            g[r] = s.g;
            v[r] = s.v;
            h1[r] = s.first;
            h2[r] = s.second;
            raw[r] = s.raw;
        }
        FgPoint p;
        p.theta = opt.theta_grid[a];
        const MeanSE fg = jackknife_intercept(g);
        p.fg = fg.mean;
        p.se = fg.se;
        const MeanSE rw = mean_se(raw);
        p.raw = rw.mean;
        p.raw_se = rw.se;
        if (opt.bhat && *opt.bhat > 0.0) {
            const MeanSE vr = jackknife_intercept(v);
            p.fg_variance = vr.mean / *opt.bhat;
            p.fg_variance_se = vr.se / *opt.bhat;
        } else {
            p.fg_variance = kNaN;
            p.fg_variance_se = kNaN;
        }
        const MeanSE diff = jackknife_difference(h1, h2);
        p.halves_difference = diff.mean;
        p.halves_se = diff.se;
        p.non_equilibrated = std::abs(diff.mean) > 2.0 * diff.se && std::abs(diff.mean) > 1e-12;
        table.points.push_back(p);
    }
    std::sort(table.points.begin(), table.points.end(), [](const FgPoint& a, const FgPoint& b) { return a.theta < b.theta; });
    return table;
}

// ---------------------------------------------------------------------------

ReferenceEnsemble fg_diffusion_reference(const std::function<double(double)>& F, double theta0, std::vector<double> s_grid,
                                         const ReferenceOptions& opt) {
    if (!(theta0 >= 0.0 && theta0 <= 1.0)) throw std::invalid_argument("theta0 must lie in [0,1]");
    check_grid(s_grid, "s_grid");
    if (!(opt.ds > 0.0)) throw std::invalid_argument("ds must be > 0");
    if (opt.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    ReferenceEnsemble out;
    out.s_grid = s_grid;
    const std::size_t R = opt.replicas;
    out.paths.assign(R, {});
    out.hitting.assign(R, kInf);
    out.censored.assign(R, 1);
    out.trap.assign(R, -1);
    const double horizon = std::max(s_grid.back(), opt.hitting_horizon);
    std::vector<double> targets = s_grid;
    if (horizon > targets.back()) targets.push_back(horizon);

    parallel_for(R, opt.threads, [&](std::size_t r) {
        Rng rng = make_rng(opt.seed, r, "reference");
        std::normal_distribution<double> normal;
        double theta = theta0;
        double now = 0.0;
        bool hit = false;
        auto check = [&](double s) {
            if (hit) return;
            if (theta <= opt.epsilon || theta >= 1.0 - opt.epsilon) {
                hit = true;
                out.hitting[r] = s;
                out.censored[r] = 0;
                out.trap[r] = theta >= 1.0 - opt.epsilon ? 1 : 0;
            }
        };
        check(0.0);
        std::size_t grid_index = 0;
        for (double target : targets) {
            const double span = target - now;
            if (span > 0.0) {
                const bool needed = grid_index < s_grid.size() || !hit;
                if (!needed) break;
                const auto n = static_cast<std::size_t>(std::ceil(span / opt.ds - 1e-9));
                const double h = span / static_cast<double>(n);
                for (std::size_t k = 0; k < n; ++k) {
                    const double f = std::max(0.0, F(theta));
                    // the normal is drawn unconditionally to keep streams aligned across F
                    const double z = normal(rng);
                    theta = bounded_update(theta, f * h, z, opt.boundary);
                    check(now + static_cast<double>(k + 1) * h);
                }
                now = target;
            }
            if (grid_index < s_grid.size() && s_grid[grid_index] == target) {
                out.paths[r].push_back(theta);
                ++grid_index;
            }
        }
        if (!hit) out.hitting[r] = horizon;
    });
    return out;
}

// ---------------------------------------------------------------------------

AccessibilityReport accessibility(const DiffusionFunction& g) {
    AccessibilityReport rep;
    auto f = [&](double x) {
        const double v = g(x);
        return v > 0.0 ? x * (1.0 - x) / v : kInf;
    };
    // integrate on [delta, 1/2] and [1/2, 1 - delta] with log panels towards the ends
    auto half = [&](double delta, bool left) {
        double total = 0.0;
        double hi = 0.5;
        while (hi > delta * (1 + 1e-12)) {
            const double lo = std::max(delta, hi / 10.0);
            const double a = left ? lo : 1.0 - hi;
            const double b = left ? hi : 1.0 - lo;
            total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 10, 1e-10);
            hi = lo;
        }
        return total;
    };
    for (int k = 2; k <= 12; ++k) {
        const double delta = std::pow(10.0, -k);
        rep.profile.push_back(half(delta, true) + half(delta, false));
    }
    rep.value = rep.profile.back();
    const double last = rep.profile.back(), prev = rep.profile[rep.profile.size() - 2];
    rep.accessible = std::isfinite(last) && std::abs(last - prev) <= 1e-2 * std::abs(last);
    return rep;
}

std::vector<double> snap_to_traps(std::vector<double> v, double epsilon) {
    for (double& x : v) {
        if (x <= epsilon) x = 0.0;
        else if (x >= 1.0 - epsilon) x = 1.0;
    }
    return v;
}

bool at_common_trap(const SystemState& s, double eps, int* which) {
    auto all = [&](auto pred) {
        return std::all_of(s.x.begin(), s.x.end(), pred) && std::all_of(s.y.begin(), s.y.end(), pred);
    };
    if (all([&](double v) { return v <= eps; })) {
        if (which) *which = 0;
        return true;
    }
    if (all([&](double v) { return v >= 1.0 - eps; })) {
        if (which) *which = 1;
        return true;
    }
    return false;
}

TrappingResult trapping_time(const ExperimentSpec& spec, const TrappingOptions& opt) {
    validate(spec);
    if (!(opt.horizon > 0.0) || !(opt.epsilon > 0.0) || !(opt.check_interval > 0.0))
        throw std::invalid_argument("trapping horizon, epsilon and check interval must be > 0");
    if (opt.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    TrappingResult out;
    out.access = accessibility(make_diffusion(spec));
    for (int n : spec.ladder) {
        const SystemParams params = ladder_params(spec, n);
        const TimeScaleReport scales = time_scales(params.kernel.geography(), params.profile, spec.model);
        const double H = opt.horizon * scales.beta_n;
        if (projected_cost(spec, n, H, opt.replicas) > spec.budget)
            throw BudgetRefusal("trapping run for n=" + std::to_string(n) + " exceeds the budget");
        TrappingEntry e;
        e.n = n;
        e.beta_n = scales.beta_n;
        e.h_over_beta.assign(opt.replicas, opt.horizon);
        e.censored.assign(opt.replicas, 1);
        e.trap.assign(opt.replicas, -1);
        const std::string stream = "trap/n=" + std::to_string(n);
        parallel_for(opt.replicas, spec.threads, [&](std::size_t r) {
            Rng rng = make_rng(spec.seed, r, stream);
            SystemState s = initial_state(spec, params, spec.theta, rng);
            int which = -1;
            if (at_common_trap(s, opt.epsilon, &which)) {
                e.h_over_beta[r] = 0.0;
                e.censored[r] = 0;
                e.trap[r] = which;
                return;
            }
            EulerMaruyama em(params);
            em.reset_noise();
            const double dt = dt_for(spec, em);
            const auto every = static_cast<std::size_t>(std::max(1.0, std::round(opt.check_interval / dt)));
            const auto steps = static_cast<std::size_t>(std::ceil(H / dt));
            for (std::size_t k = 1; k <= steps; ++k) {
                em.step(s, dt, rng);
                if (k % every == 0 && at_common_trap(s, opt.epsilon, &which)) {
                    e.h_over_beta[r] = static_cast<double>(k) * dt / scales.beta_n;
                    e.censored[r] = 0;
                    e.trap[r] = which;
                    return;
                }
            }
        });
        std::vector<double> vals;
        std::size_t cens = 0;
        for (std::size_t r = 0; r < opt.replicas; ++r) {
            vals.push_back(e.censored[r] ? kInf : e.h_over_beta[r]);
            cens += e.censored[r] ? 1 : 0;
        }
        e.censored_fraction = static_cast<double>(cens) / static_cast<double>(opt.replicas);
        e.median = median_with_censoring(vals);
        out.entries.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string pattern_name(ClusterPattern p) {
    switch (p) {
    case ClusterPattern::Equilibrium: return "equilibrium";
    case ClusterPattern::PartialClustering: return "partial_clustering";
    case ClusterPattern::CompleteClustering: return "complete_clustering";
    default: return "unclassified";
    }
}

namespace {
double component(const SystemState& s, std::size_t i, int layer) { return layer == 0 ? s.x[i] : s.dormant(i, layer - 1); }
} // namespace

double pair_diagnostic(const SystemState& s, int first, int last) {
    if (first < 0 || last > s.colours || first > last) throw std::invalid_argument("layer range outside the state");
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < s.sites; ++i) {
        for (int l = first; l <= last; ++l) {
            const double z = component(s, i, l);
            s1 += z;
            s2 += z * (1.0 - z);
        }
    }
    const double P = static_cast<double>(s.sites) * static_cast<double>(last - first + 1);
    if (P < 2.0) return kNaN;
    return std::max(0.0, (s1 * (P - s1) - s2) / (P * (P - 1.0)));
}

int clustering_depth(double t, double beta, int M) {
    if (!(t > 0.0)) return 0;
    const double L = std::floor(std::pow(t, 1.0 / beta) / 10.0);
    return static_cast<int>(std::clamp(L, 0.0, static_cast<double>(M)));
}

ClusteringReport clustering_diagnostics(const ExperimentSpec& spec, const ClusteringOptions& opt) {
    validate(spec);
    check_grid(opt.probe_times, "probe_times");
    if (opt.replicas < 2) throw std::invalid_argument("clustering diagnostics need at least 2 replicas");
    ClusteringReport rep;
    rep.n = spec.ladder.back();
    const SystemParams params = ladder_params(spec, rep.n);
    const PolynomialBank* pb = polynomial_of(params.profile);
    if (!pb) throw std::invalid_argument("clustering diagnostics need a polynomial seed-bank");
    rep.scales = time_scales(params.kernel.geography(), params.profile, spec.model);
    if (rep.scales.regime != GrowthRegime::II)
        throw std::invalid_argument("clustering diagnostics need regime II, got " + regime_name(rep.scales.regime));
    const double gamma = *rep.scales.gamma;
    rep.psi = params.kernel.geography().size() > 1 ? estimate_mixing_time(params.kernel, 0.25).time : 0.0;
    rep.psi_bound = std::pow(*rep.scales.beta_2star, gamma);
    rep.psi_warning = rep.psi > kRegimeBand * rep.psi_bound;
    const double horizon = opt.probe_times.back();
    if (projected_cost(spec, rep.n, horizon, opt.replicas) > spec.budget)
        throw BudgetRefusal("clustering run exceeds the budget");

    const int M = params.profile.M();
    const std::size_t P = opt.probe_times.size(), R = opt.replicas;
    struct Cell {
        double shallow = kNaN, deep = kNaN, full = kNaN, deep_mean = kNaN;
        int upsilon = 0;
    };
    std::vector<Cell> cells(P * R);
    std::vector<int> depth(P);
    for (std::size_t k = 0; k < P; ++k) depth[k] = clustering_depth(opt.probe_times[k], pb->beta, M);

    parallel_for(R, spec.threads, [&](std::size_t r) {
        Rng rng = make_rng(spec.seed, r, "clustering");
        SystemState s0 = initial_state(spec, params, spec.theta, rng);
        std::vector<SystemState> snaps;
        if (horizon > 0.0) {
            EulerMaruyama em(params);
            RunOptions ro;
            ro.horizon = horizon;
            ro.dt = spec.dt;
            ro.observe = opt.probe_times;
            ro.snapshots = true;
            snaps = run(std::move(s0), em, ro, rng).snapshots;
        } else {
            snaps.push_back(std::move(s0));
        }
        for (std::size_t k = 0; k < P; ++k) {
            const SystemState& s = snaps[k];
            Cell& c = cells[k * R + r];
            const int L = depth[k];
            c.shallow = pair_diagnostic(s, 0, L + 1);
            c.full = pair_diagnostic(s, 0, M + 1);
            double shallow_sum = 0.0;
            for (std::size_t i = 0; i < s.sites; ++i)
                for (int l = 0; l <= L + 1; ++l) shallow_sum += component(s, i, l);
            c.upsilon = shallow_sum / (static_cast<double>(s.sites) * (L + 2)) > 0.5 ? 1 : 0;
            if (L + 2 <= M + 1) {
                c.deep = pair_diagnostic(s, L + 2, M + 1);
                double deep_sum = 0.0;
                for (std::size_t i = 0; i < s.sites; ++i)
                    for (int l = L + 2; l <= M + 1; ++l) deep_sum += component(s, i, l);
                c.deep_mean = deep_sum / (static_cast<double>(s.sites) * (M - L));
            }
        }
    });

    const double theta = spec.theta;
    const double v0 = theta * (1.0 - theta);
    const double tol = opt.tolerance * v0;
    for (std::size_t k = 0; k < P; ++k) {
        ClusteringProbe pr;
        pr.t = opt.probe_times[k];
        pr.L = depth[k];
        std::vector<double> sh, dp, fl, dm;
        double ups = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            const Cell& c = cells[k * R + r];
            sh.push_back(c.shallow);
            fl.push_back(c.full);
            if (!std::isnan(c.deep)) {
                dp.push_back(c.deep);
                dm.push_back(c.deep_mean);
            }
            ups += c.upsilon;
        }
        pr.shallow = mean_se(sh);
        pr.full = mean_se(fl);
        pr.deep = dp.empty() ? MeanSE{kNaN, kNaN, 0} : mean_se(dp);
        pr.deep_mean = dm.empty() ? MeanSE{kNaN, kNaN, 0} : mean_se(dm);
        pr.upsilon_frequency = ups / static_cast<double>(R);
        pr.upsilon_se = std::sqrt(v0 / static_cast<double>(R));
        const bool deep_unchanged =
            dm.empty() || std::abs(pr.deep_mean.mean - theta) <= std::max(4.0 * pr.deep_mean.se, 1e-12);
        if (pr.full.mean < tol) pr.pattern = ClusterPattern::CompleteClustering;
        else if (pr.shallow.mean < tol && deep_unchanged) pr.pattern = ClusterPattern::PartialClustering;
        else if (std::abs(pr.shallow.mean - v0) <= 0.2 * v0) pr.pattern = ClusterPattern::Equilibrium;
        else pr.pattern = ClusterPattern::Unclassified;
        rep.probes.push_back(pr);
    }
    return rep;
}

// ---------------------------------------------------------------------------

std::uint64_t sample_renewal_increment(double gamma, std::uint64_t cap, Rng& rng) {
    const double u = 1.0 - std::generate_canonical<double, 64>(rng); // (0, 1]
    const double x = std::pow(u, -1.0 / gamma);
    if (!(x < static_cast<double>(cap))) return cap;
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(x)));
}

std::uint64_t sample_intersection_increment(double gamma, std::uint64_t horizon, Rng& rng) {
    const std::uint64_t cap = horizon + 2;
    std::uint64_t a = sample_renewal_increment(gamma, cap, rng);
    std::uint64_t b = sample_renewal_increment(gamma, cap, rng);
    while (true) {
        if (a == b) return std::min(a, horizon + 1);
        if (std::min(a, b) > horizon) return horizon + 1;
        if (a < b) a += sample_renewal_increment(gamma, cap, rng);
        else b += sample_renewal_increment(gamma, cap, rng);
    }
}

std::vector<double> renewal_increment_law(double gamma, std::size_t nmax) {
    std::vector<double> f(nmax + 1, 0.0);
    for (std::size_t n = 2; n <= nmax; ++n)
        f[n] = std::pow(static_cast<double>(n - 1), -gamma) - std::pow(static_cast<double>(n), -gamma);
    return f;
}

std::vector<double> intersection_increment_law(double gamma, std::size_t nmax) {
    const std::vector<double> f = renewal_increment_law(gamma, nmax);
    std::vector<double> u(nmax + 1, 0.0), us(nmax + 1, 0.0), fs(nmax + 1, 0.0);
    u[0] = 1.0;
    for (std::size_t n = 1; n <= nmax; ++n) {
        double s = 0.0;
        for (std::size_t k = 1; k <= n; ++k) s += f[k] * u[n - k];
        u[n] = s;
    }
    for (std::size_t n = 0; n <= nmax; ++n) us[n] = u[n] * u[n];
    for (std::size_t n = 1; n <= nmax; ++n) {
        double s = us[n];
        for (std::size_t k = 1; k < n; ++k) s -= fs[k] * us[n - k];
        fs[n] = s;
    }
    return fs;
}

RenewalResult renewal_intersection_exponent(double gamma, const RenewalOptions& opt) {
    if (!(gamma > 0.5 && gamma <= 1.0)) throw std::invalid_argument("renewal intersection needs gamma in (1/2, 1]");
    if (!(opt.horizon >= 100.0)) throw std::invalid_argument("renewal horizon must be >= 100");
    if (opt.increments < 1000) throw std::invalid_argument("renewal fit needs at least 1000 increments");
    RenewalResult res;
    res.gamma = gamma;
    res.target = 2.0 * gamma - 1.0;
    res.increments = opt.increments;
    const auto H = static_cast<std::uint64_t>(opt.horizon);

    constexpr std::size_t kChunk = 1000;
    const std::size_t chunks = (opt.increments + kChunk - 1) / kChunk;
    std::vector<std::uint64_t> v(opt.increments);
    parallel_for(chunks, opt.threads, [&](std::size_t c) {
        Rng rng = make_rng(opt.seed, c, label("renewal/gamma", gamma));
        const std::size_t end = std::min(opt.increments, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) v[i] = sample_intersection_increment(gamma, H, rng);
    });
    std::sort(v.begin(), v.end());
    const double N = static_cast<double>(v.size());
    auto exceed = [&](double n) {
        return static_cast<std::size_t>(v.end() - std::upper_bound(v.begin(), v.end(), static_cast<std::uint64_t>(n)));
    };
    res.censored = exceed(static_cast<double>(H));
    for (double n = 1.0; n <= static_cast<double>(H) * (1 + 1e-12); n *= std::pow(10.0, 0.1)) {
        const double nn = std::floor(n);
        const double p = static_cast<double>(exceed(nn)) / N;
        res.survival.push_back({nn, p, std::sqrt(p * (1 - p) / N)});
    }

    res.fit_lo = opt.fit_lo;
    res.fit_hi = opt.fit_lo;
    for (double n = opt.fit_lo; n <= static_cast<double>(H) / 10.0; n *= std::pow(10.0, 0.025)) {
        if (exceed(n) < opt.min_tail_count) break;
        res.fit_hi = n;
    }
    if (res.fit_hi < 10.0 * res.fit_lo)
        throw NumericalFailure("renewal tail too thin for a one-decade fit; raise increments or horizon");
    std::vector<double> lx, ly;
    for (int k = 0; k < 30; ++k) {
        const double n = res.fit_lo * std::pow(res.fit_hi / res.fit_lo, k / 29.0);
        lx.push_back(std::log(n));
        ly.push_back(std::log(static_cast<double>(exceed(n)) / N));
    }
    const LinearFit fit = fit_line(lx, ly);
    res.fitted = -fit.slope;
    res.fitted_se = fit.slope_se;
    res.amplitude = std::exp(fit.intercept);
    const double gs = res.target;
    res.D_from_amplitude = gs < 1.0 ? res.amplitude * std::tgamma(1.0 - gs) : kNaN;

    // Laplace transform of T = V / G^{1/gamma*}, V a Geometric(1/G) sum of increments.
    const std::size_t S = opt.laplace_samples;
    const double G = static_cast<double>(opt.laplace_sites);
    if (S > 0 && G >= 2.0) {
        const double scale = std::pow(G, 1.0 / gs);
        const std::size_t L = opt.lambdas.size();
        std::vector<double> vals(S * L, 0.0);
        std::vector<char> cens(S, 0);
        parallel_for(S, opt.threads, [&](std::size_t i) {
            Rng rng = make_rng(opt.seed, i, label("renewal/laplace/gamma", gamma));
            std::geometric_distribution<std::uint64_t> attempts(1.0 / G);
            const std::uint64_t K = attempts(rng) + 1;
            double V = 0.0;
            bool censored = false;
            for (std::uint64_t k = 0; k < K; ++k) {
                const std::uint64_t x = sample_intersection_increment(gamma, H, rng);
                if (x > H) {
                    censored = true;
                    break;
                }
                V += static_cast<double>(x);
            }
            cens[i] = censored ? 1 : 0;
            for (std::size_t l = 0; l < L; ++l) vals[i * L + l] = censored ? 0.0 : std::exp(-opt.lambdas[l] * V / scale);
        });
        for (char c : cens) res.laplace_censored += c ? 1 : 0;
        for (std::size_t l = 0; l < L; ++l) {
            std::vector<double> col(S);
            for (std::size_t i = 0; i < S; ++i) col[i] = vals[i * L + l];
            const MeanSE m = mean_se(col);
            res.laplace.push_back({opt.lambdas[l], m.mean, m.se, 0.0});
        }
        auto loss = [&](double logD) {
            const double D = std::exp(logD);
            double s = 0.0;
            for (const auto& p : res.laplace) {
                const double r = p.empirical - 1.0 / (1.0 + D * std::pow(p.lambda, gs));
                s += r * r;
            }
            return s;
        };
        const auto best = boost::math::tools::brent_find_minima(loss, -12.0, 12.0, 40);
        res.D = std::exp(best.first);
        for (auto& p : res.laplace) {
            p.model = 1.0 / (1.0 + res.D * std::pow(p.lambda, gs));
            res.laplace_max_deviation = std::max(res.laplace_max_deviation, std::abs(p.model - p.empirical));
        }
    }
    return res;
}

} // namespace seedbank
