#include "seedbank/commands.hpp"
#include "seedbank/errors.hpp"
#include "seedbank/output.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace seedbank {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cell num(double v) { return Cell{v}; }
Cell integer(std::int64_t v) { return Cell{v}; }
Cell text(std::string s) { return Cell{std::move(s)}; }

std::string params_string(const std::map<std::string, double>& p) {
    std::string s;
    for (const auto& [k, v] : p) s += (s.empty() ? "" : ";") + k + "=" + format_double(v);
    return s;
}

// Collects outputs, respecting the selected formats.
class Emitter {
public:
    Emitter(fs::path dir, const std::vector<std::string>& formats)
        : dir_(std::move(dir)), formats_(formats.begin(), formats.end()) {}

    bool wants(const std::string& f) const { return formats_.count(f) > 0; }

    void csv(const std::string& name, const Table& t) {
        if (!wants("csv")) return;
        write_csv(dir_ / name, t);
        outputs_.push_back(name);
    }
    void jsonl(const std::string& name, const std::vector<json>& lines) {
        if (!wants("jsonl")) return;
        write_jsonl(dir_ / name, lines);
        outputs_.push_back(name);
    }
    void svg(const std::string& name, const std::string& content) {
        if (!wants("svg")) return;
        write_text(dir_ / name, content);
        outputs_.push_back(name);
    }
    const std::vector<std::string>& outputs() const { return outputs_; }

private:
    fs::path dir_;
    std::set<std::string> formats_;
    std::vector<std::string> outputs_;
};

struct Context {
    const Config& c;
    Emitter& emit;
    std::ostream& log;
    std::vector<std::string> warnings;
};

void warn(Context& ctx, const std::string& w) {
    ctx.warnings.push_back(w);
    ctx.log << "warning: " << w << "\n";
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// ---------------------------------------------------------------------------

void cmd_forward(Context& ctx) {
    const Config& c = ctx.c;
    const SystemParams params = ladder_params(c.spec, c.n);
    std::vector<double> times;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * c.forward.observe_every;
        if (t > c.forward.horizon * (1 + 1e-12)) break;
        times.push_back(std::min(t, c.forward.horizon));
    }
    if (times.back() < c.forward.horizon) times.push_back(c.forward.horizon);
    const double cost = projected_cost(c.spec, c.n, c.forward.horizon, c.forward.replicas);
    if (cost > c.run.budget) throw BudgetRefusal("forward run projects " + fixed(cost) + " site-steps, above the budget");

    const std::size_t R = c.forward.replicas;
    std::vector<std::vector<Observation>> records(R);
    parallel_for(R, c.run.threads, [&](std::size_t r) {
        Rng rng = make_rng(c.run.seed, r, "noise");
        SystemState s0 = initial_state(c.spec, params, c.spec.theta, rng);
        EulerMaruyama em(params);
        RunOptions ro;
        ro.horizon = c.forward.horizon;
        ro.dt = c.spec.dt;
        ro.observe = times;
        records[r] = run(std::move(s0), em, ro, rng).records;
    });

    Table t{{"replica", "time", "theta_hat", "theta_x", "diversity", "qvar"}, {}};
    std::vector<Series> series;
    std::vector<double> final_theta;
    for (std::size_t r = 0; r < R; ++r) {
        Series s{"replica " + std::to_string(r), {}, {}};
        for (const Observation& o : records[r]) {
            t.add({integer(static_cast<std::int64_t>(r)), num(o.time), num(o.theta_hat), num(o.theta_x), num(o.diversity), num(o.qvar)});
            s.x.push_back(o.time);
            s.y.push_back(o.theta_hat);
        }
        final_theta.push_back(records[r].back().theta_hat);
        if (series.size() < 20) series.push_back(std::move(s));
    }
    ctx.emit.csv("trajectories.csv", t);
    ctx.emit.svg("theta_paths.svg", svg_line_plot(series, {"macroscopic density paths", "time", "theta_hat"}));
    const MeanSE m = mean_se(final_theta);
    ctx.log << "forward: " << R << " replicas on " << params.kernel.geography().describe() << ", mean theta_hat(T) = "
            << fixed(m.mean, 6) << " +- " << fixed(m.se, 3) << " (theta = " << c.spec.theta << ")\n";
}

// ---------------------------------------------------------------------------

void cmd_dual(Context& ctx) {
    const Config& c = ctx.c;
    const SystemParams params = ladder_params(c.spec, c.n);
    const LineageDynamics dyn(params.kernel, params.profile, params.model, params.displacement);
    const std::size_t R = c.dual.replicas;
    std::vector<CoalescentHistory> hist(R);
    CoalescentOptions co;
    co.record_events = ctx.emit.wants("jsonl");
    co.record_motion = c.dual.record_motion;
    parallel_for(R, c.run.threads, [&](std::size_t r) {
        Rng rng = make_rng(c.run.seed, r, "dual");
        LineageDynamics local = dyn;
        std::vector<Lineage> init;
        for (std::size_t i = 0; i < c.dual.lineages.size(); ++i)
            init.push_back({c.dual.lineages[i].site, c.dual.lineages[i].state, static_cast<int>(i), true});
        hist[r] = run_coalescent(std::move(init), local, c.dual.d, c.dual.horizon, rng, co);
    });

    std::vector<json> lines;
    Table part{{"replica", "block", "ids"}, {}};
    Table fin{{"replica", "id", "alive", "site", "colour"}, {}};
    RunningStats blocks;
    for (std::size_t r = 0; r < R; ++r) {
        for (const CoalescentEvent& e : hist[r].events)
            lines.push_back({{"replica", r}, {"t", e.t}, {"type", event_name(e.type)}, {"ids", e.ids}, {"site", e.site}, {"colour", e.colour}});
        for (std::size_t b = 0; b < hist[r].partition.size(); ++b) {
            std::string ids;
            for (int id : hist[r].partition[b]) ids += (ids.empty() ? "" : ";") + std::to_string(id);
            part.add({integer(static_cast<std::int64_t>(r)), integer(static_cast<std::int64_t>(b)), text(ids)});
        }
        for (const Lineage& l : hist[r].lineages)
            fin.add({integer(static_cast<std::int64_t>(r)), integer(l.id), integer(l.alive ? 1 : 0), integer(l.site), integer(l.state.colour)});
        blocks.add(static_cast<double>(hist[r].partition.size()));
    }
    if (!lines.empty() || ctx.emit.wants("jsonl")) ctx.emit.jsonl("events.jsonl", lines);
    ctx.emit.csv("partition.csv", part);
    ctx.emit.csv("lineages.csv", fin);
    ctx.log << "dual: " << R << " replicas, mean number of blocks at T = " << fixed(blocks.mean(), 6) << "\n";

    if (c.dual.hazard) {
        if (c.dual.lineages.size() < 2) throw ConfigError("dual.lineages", "hazard estimation needs two lineages");
        HazardOptions ho;
        ho.replicas = c.dual.hazard_replicas;
        ho.seed = c.run.seed;
        ho.threads = c.run.threads;
        const HazardEstimate h = estimate_hazard(c.dual.lineages[0], c.dual.lineages[1], dyn, c.dual.hazard_T, ho);
        Table prof{{"t", "mean", "se"}, {}};
        for (const auto& p : h.profile) prof.add({num(p.t), num(p.mean), num(p.se)});
        ctx.emit.csv("hazard_profile.csv", prof);
        const double dstar = c.spec.g_kind == DiffusionKind::FisherWright ? renormalize_fw(c.spec.g_rate, std::max(0.0, h.intercept)) : kNaN;
        Table sum{{"T", "hazard", "se", "plateau", "last_decade_growth", "slope", "intercept", "intercept_se", "d_star"}, {}};
        sum.add({num(c.dual.hazard_T), num(h.hazard), num(h.se), integer(h.plateau ? 1 : 0), num(h.last_decade_growth), num(h.slope),
                 num(h.intercept), num(h.intercept_se), num(dstar)});
        ctx.emit.csv("hazard.csv", sum);
        ctx.log << "hazard: H(T) = " << fixed(h.hazard, 6) << " +- " << fixed(h.se, 3) << ", linear intercept " << fixed(h.intercept, 6)
                << " +- " << fixed(h.intercept_se, 3) << (h.plateau ? " (plateau)" : " (growing)") << "\n";
    }
}

// ---------------------------------------------------------------------------

void cmd_criteria(Context& ctx) {
    const Config& c = ctx.c;
    if (c.criteria.examples.empty() && c.criteria.integrals.empty())
        throw ConfigError("criteria", "nothing to evaluate: give examples or integrals");
    Table t{{"kind", "name", "verdict", "evidence", "finite_value", "tail_value", "total", "extrapolation_error", "tail_exponent", "parameters"}, {}};
    auto row = [&](const std::string& kind, const std::string& name, const RegimeVerdict& v) {
        t.add({text(kind), text(name), text(verdict_name(v.verdict)),
               text(v.evidence == Evidence::ClosedForm ? "closed_form" : "numerical_integral"), num(v.finite_value), num(v.tail_value),
               num(v.total), num(v.extrapolation_error), num(v.tail_exponent), text(params_string(v.parameters))});
        ctx.log << "  " << kind << " " << name << ": " << verdict_name(v.verdict) << "  [" << params_string(v.parameters) << "]\n";
    };
    ctx.log << "criteria:\n";
    for (const auto& ex : c.criteria.examples) row("example", example_name(ex), classify_example(ex));
    for (std::size_t i = 0; i < c.criteria.integrals.size(); ++i) {
        const IntegralSpec& in = c.criteria.integrals[i];
        const ReturnProbability a =
            in.a.tabulated ? ReturnProbability::tabulated(in.a.t, in.a.values) : ReturnProbability::power_law(in.a.c, in.a.a);
        CriterionMode mode = FiniteRho{};
        if (in.mode == IntegralSpec::Mode::InfiniteRho) mode = InfiniteRho{in.gamma};
        RegimeVerdict v = coexistence_integral(a, mode, in.horizon);
        row("integral", in.mode == IntegralSpec::Mode::FiniteRho ? "finite_rho" : "infinite_rho", v);
        if (v.verdict == Verdict::Boundary) warn(ctx, "integral " + std::to_string(i) + " is inconclusive (tail exponent near -1)");
    }
    ctx.emit.csv("criteria.csv", t);
}

// ---------------------------------------------------------------------------

std::optional<double> fss_bhat(Context& ctx) {
    const Config& c = ctx.c;
    const FssSection& f = c.fss;
    if (f.bhat_source == "value") return f.bhat_value;
    if (f.bhat_source != "dual") return std::nullopt;
    const SystemParams p = ladder_params(c.spec, c.spec.ladder.back());
    const LineageDynamics dyn(p.kernel, p.profile, p.model, p.displacement);
    HazardOptions ho;
    ho.replicas = f.hazard_replicas;
    ho.seed = c.run.seed;
    ho.threads = c.run.threads;
    const DualState origin{0, ActivityState::Active()};
    const HazardEstimate h = estimate_hazard(origin, origin, dyn, f.hazard_T, ho);
    Table t{{"n", "T", "hazard", "se", "slope", "intercept", "intercept_se"}, {}};
    t.add({integer(c.spec.ladder.back()), num(f.hazard_T), num(h.hazard), num(h.se), num(h.slope), num(h.intercept), num(h.intercept_se)});
    ctx.emit.csv("bhat.csv", t);
    ctx.log << "bhat: intercept " << fixed(h.intercept, 6) << " +- " << fixed(h.intercept_se, 3) << " on n=" << c.spec.ladder.back() << "\n";
    return std::max(0.0, h.intercept);
}

void cmd_fss(Context& ctx) {
    const Config& c = ctx.c;
    const ExperimentSpec& spec = c.spec;
    const FssSection& f = c.fss;
    const std::set<std::string> tasks(f.tasks.begin(), f.tasks.end());
    const std::set<std::string> obs(f.observables.begin(), f.observables.end());
    std::optional<double> bhat;
    if (tasks.count("fg") || (tasks.count("reference") && !f.reference_d_star)) bhat = fss_bhat(ctx);

    Table scales{{"n", "sites", "M", "kappa", "beta_n", "gamma", "beta_star", "beta_2star", "regime"}, {}};
    for (int n : spec.ladder) {
        const SystemParams p = ladder_params(spec, n);
        const TimeScaleReport r = time_scales(p.kernel.geography(), p.profile, spec.model);
        scales.add({integer(n), integer(static_cast<std::int64_t>(r.sites)), integer(r.M), num(r.kappa), num(r.beta_n),
                    num(r.gamma.value_or(kNaN)), num(r.beta_star.value_or(kNaN)), num(r.beta_2star.value_or(kNaN)), text(regime_name(r.regime))});
    }
    ctx.emit.csv("timescales.csv", scales);

    std::optional<FssResult> paths;
    if (tasks.count("paths")) {
        paths = finite_systems_run(spec);
        std::vector<std::string> cols{"n", "replica", "s", "time"};
        if (obs.count("theta_hat")) cols.push_back("theta_hat");
        if (obs.count("theta_x")) cols.push_back("theta_x");
        Table t{cols, {}};
        for (const LadderRun& e : paths->entries) {
            for (std::size_t r = 0; r < e.theta_hat.size(); ++r) {
                for (std::size_t k = 0; k < e.times.size(); ++k) {
                    std::vector<Cell> row{integer(e.n), integer(static_cast<std::int64_t>(r)), num(spec.s_grid[k]), num(e.times[k])};
                    if (obs.count("theta_hat")) row.push_back(num(e.theta_hat[r][k]));
                    if (obs.count("theta_x")) row.push_back(num(e.theta_x[r][k]));
                    t.add(std::move(row));
                }
            }
        }
        if (cols.size() > 4) ctx.emit.csv("paths.csv", t);
        if (obs.count("diversity")) {
            Table d{{"n", "replica", "diversity"}, {}};
            for (const LadderRun& e : paths->entries)
                for (std::size_t r = 0; r < e.final_moments.size(); ++r)
                    d.add({integer(e.n), integer(static_cast<std::int64_t>(r)), num(e.final_moments[r].diversity)});
            ctx.emit.csv("final_diversity.csv", d);
        }
        if (obs.count("depth_moments")) {
            Table d{{"n", "replica", "layer", "mean", "variance"}, {}};
            for (const LadderRun& e : paths->entries)
                for (std::size_t r = 0; r < e.final_moments.size(); ++r)
                    for (std::size_t l = 0; l < e.final_moments[r].means.size(); ++l)
                        d.add({integer(e.n), integer(static_cast<std::int64_t>(r)), integer(static_cast<std::int64_t>(l)),
                               num(e.final_moments[r].means[l]), num(e.final_moments[r].variances[l])});
            ctx.emit.csv("final_depth_moments.csv", d);
        }
        Table ks{{"s", "n_a", "n_b", "statistic", "p_value"}, {}};
        for (std::size_t a = 0; a + 1 < paths->entries.size(); ++a) {
            const LadderRun& A = paths->entries[a];
            const LadderRun& B = paths->entries[a + 1];
            for (std::size_t k = 0; k < spec.s_grid.size(); ++k) {
                std::vector<double> xa, xb;
                for (const auto& p : A.theta_hat) xa.push_back(p[k]);
                for (const auto& p : B.theta_hat) xb.push_back(p[k]);
                const KsResult r = ks_two_sample(snap_to_traps(xa), snap_to_traps(xb));
                ks.add({num(spec.s_grid[k]), integer(A.n), integer(B.n), num(r.statistic), num(r.p_value)});
            }
        }
        if (paths->entries.size() > 1) ctx.emit.csv("ladder_ks.csv", ks);
        const LadderRun& last = paths->entries.back();
        std::vector<Series> series;
        for (std::size_t r = 0; r < std::min<std::size_t>(20, last.theta_hat.size()); ++r)
            series.push_back({"replica " + std::to_string(r), spec.s_grid, last.theta_hat[r]});
        ctx.emit.svg("paths.svg", svg_line_plot(series, {"theta_hat(s beta) at n=" + std::to_string(last.n), "s", "theta_hat"}));
        ctx.log << "fss paths: ladder of " << paths->entries.size() << " entries, " << spec.replicas << " replicas each\n";
    }

    std::optional<FgTable> fg;
    if (tasks.count("fg")) {
        FgOptions fo = f.fg;
        fo.bhat = bhat;
        fg = estimate_Fg(spec, fo);
        Table t{{"theta", "fg", "se", "raw", "raw_se", "fg_variance", "fg_variance_se", "halves_difference", "halves_se", "non_equilibrated"}, {}};
        Series s1{"F g (conditioned)", {}, {}}, s2{"raw window average", {}, {}};
        for (const FgPoint& p : fg->points) {
            t.add({num(p.theta), num(p.fg), num(p.se), num(p.raw), num(p.raw_se), num(p.fg_variance), num(p.fg_variance_se),
                   num(p.halves_difference), num(p.halves_se), integer(p.non_equilibrated ? 1 : 0)});
            s1.x.push_back(p.theta);
            s1.y.push_back(p.fg);
            s2.x.push_back(p.theta);
            s2.y.push_back(p.raw);
            if (p.non_equilibrated) warn(ctx, "F g at theta=" + fixed(p.theta) + " did not equilibrate (window halves differ by > 2 SE)");
        }
        ctx.emit.csv("fg.csv", t);
        ctx.emit.svg("fg.svg", svg_line_plot({s1, s2}, {"estimated F g", "theta", "F g"}));
        ctx.log << "fg: n=" << fg->n << ", relaxation " << fixed(fg->relaxation) << ", burn-in " << fixed(fg->burn_in) << ", window "
                << fixed(fg->window) << "\n";
    }

    std::optional<ReferenceEnsemble> ref;
    if (tasks.count("reference")) {
        std::function<double(double)> F;
        if (f.reference_source == "fg_table") {
            if (!fg) throw ConfigError("fss.reference.source", "fg_table needs the fg task");
            const FgTable table = *fg;
            F = [table](double th) { return table(th); };
        } else {
            double dstar;
            if (f.reference_d_star) dstar = *f.reference_d_star;
            else {
                if (!bhat) throw ConfigError("fss.reference.d_star", "give d_star or a Bhat source");
                if (spec.g_kind != DiffusionKind::FisherWright) throw ConfigError("fss.reference.d_star", "d* from Bhat needs Fisher-Wright g");
                dstar = renormalize_fw(spec.g_rate, *bhat);
            }
            F = [dstar](double th) { return dstar * th * (1.0 - th); };
            ctx.log << "reference: d* = " << fixed(dstar, 6) << "\n";
        }
        ReferenceOptions ro;
        ro.replicas = f.reference_replicas;
        ro.ds = f.reference_ds;
        ro.boundary = spec.boundary;
        ro.seed = c.run.seed;
        ro.threads = c.run.threads;
        ro.hitting_horizon = tasks.count("trapping") ? f.trapping.horizon : 0.0;
        ref = fg_diffusion_reference(F, spec.theta, spec.s_grid, ro);
        Table t{{"replica", "s", "theta"}, {}};
        Table h{{"replica", "hitting", "censored", "trap"}, {}};
        for (std::size_t r = 0; r < ref->paths.size(); ++r) {
            for (std::size_t k = 0; k < spec.s_grid.size(); ++k) t.add({integer(static_cast<std::int64_t>(r)), num(spec.s_grid[k]), num(ref->paths[r][k])});
            h.add({integer(static_cast<std::int64_t>(r)), num(ref->hitting[r]), integer(ref->censored[r]), integer(ref->trap[r])});
        }
        ctx.emit.csv("reference.csv", t);
        ctx.emit.csv("reference_hitting.csv", h);
        if (paths) {
            Table ks{{"s", "n", "statistic", "p_value"}, {}};
            const LadderRun& last = paths->entries.back();
            for (std::size_t k = 0; k < spec.s_grid.size(); ++k) {
                std::vector<double> a, b;
                for (const auto& p : last.theta_hat) a.push_back(p[k]);
                for (const auto& p : ref->paths) b.push_back(p[k]);
                const KsResult r = ks_two_sample(snap_to_traps(a), snap_to_traps(b));
                ks.add({num(spec.s_grid[k]), integer(last.n), num(r.statistic), num(r.p_value)});
            }
            ctx.emit.csv("reference_ks.csv", ks);
        }
    }

    if (tasks.count("trapping")) {
        const TrappingResult tr = trapping_time(spec, f.trapping);
        Table t{{"n", "replica", "h_over_beta", "censored", "trap"}, {}};
        Table s{{"n", "beta_n", "median", "censored_fraction", "accessible", "accessibility_integral"}, {}};
        for (const TrappingEntry& e : tr.entries) {
            for (std::size_t r = 0; r < e.h_over_beta.size(); ++r)
                t.add({integer(e.n), integer(static_cast<std::int64_t>(r)), num(e.h_over_beta[r]), integer(e.censored[r]), integer(e.trap[r])});
            s.add({integer(e.n), num(e.beta_n), num(e.median), num(e.censored_fraction), integer(tr.access.accessible ? 1 : 0), num(tr.access.value)});
            ctx.log << "trapping n=" << e.n << ": median H/beta = " << fixed(e.median) << ", censored " << fixed(e.censored_fraction) << "\n";
        }
        ctx.emit.csv("trapping.csv", t);
        ctx.emit.csv("trapping_summary.csv", s);
        std::vector<double> vals;
        for (std::size_t r = 0; r < tr.entries.back().h_over_beta.size(); ++r)
            vals.push_back(tr.entries.back().censored[r] ? std::numeric_limits<double>::infinity() : tr.entries.back().h_over_beta[r]);
        ctx.emit.svg("trapping.svg", svg_histogram(vals, 30, {"trapping time at n=" + std::to_string(tr.entries.back().n), "H / beta_n", "count"}));
        if (!tr.access.accessible) warn(ctx, "g is not accessible at the boundary; trapping times are censored");
    }

    if (tasks.count("clustering")) {
        if (f.clustering.probe_times.empty()) throw ConfigError("fss.clustering.probe_times", "must not be empty for the clustering task");
        const ClusteringReport rep = clustering_diagnostics(spec, f.clustering);
        Table t{{"t", "L", "shallow", "shallow_se", "deep", "deep_se", "full", "full_se", "deep_mean", "deep_mean_se", "upsilon_frequency",
                 "upsilon_se", "pattern"},
                {}};
        for (const ClusteringProbe& p : rep.probes)
            t.add({num(p.t), integer(p.L), num(p.shallow.mean), num(p.shallow.se), num(p.deep.mean), num(p.deep.se), num(p.full.mean),
                   num(p.full.se), num(p.deep_mean.mean), num(p.deep_mean.se), num(p.upsilon_frequency), num(p.upsilon_se),
                   text(pattern_name(p.pattern))});
        ctx.emit.csv("clustering.csv", t);
        if (rep.psi_warning) warn(ctx, "mixing time " + fixed(rep.psi) + " is not small against (beta**)^gamma = " + fixed(rep.psi_bound));
    }
}

// ---------------------------------------------------------------------------

void cmd_renewal(Context& ctx) {
    const Config& c = ctx.c;
    Table fit{{"gamma", "target", "fitted", "fitted_se", "fit_lo", "fit_hi", "amplitude", "increments", "censored", "D", "D_from_amplitude",
               "laplace_max_deviation", "laplace_censored"},
              {}};
    Table surv{{"gamma", "n", "survival", "se"}, {}};
    Table lap{{"gamma", "lambda", "empirical", "se", "model"}, {}};
    std::vector<Series> series;
    for (double g : c.renewal.gammas) {
        RenewalOptions o = c.renewal.options;
        o.seed = c.run.seed;
        o.threads = c.run.threads;
        const RenewalResult r = renewal_intersection_exponent(g, o);
        fit.add({num(g), num(r.target), num(r.fitted), num(r.fitted_se), num(r.fit_lo), num(r.fit_hi), num(r.amplitude),
                 integer(static_cast<std::int64_t>(r.increments)), integer(static_cast<std::int64_t>(r.censored)), num(r.D),
                 num(r.D_from_amplitude), num(r.laplace_max_deviation), integer(static_cast<std::int64_t>(r.laplace_censored))});
        Series s{"gamma=" + fixed(g, 3), {}, {}};
        for (const auto& p : r.survival) {
            surv.add({num(g), num(p.n), num(p.survival), num(p.se)});
            s.x.push_back(p.n);
            s.y.push_back(p.survival);
        }
        for (const auto& p : r.laplace) lap.add({num(g), num(p.lambda), num(p.empirical), num(p.se), num(p.model)});
        series.push_back(std::move(s));
        ctx.log << "renewal gamma=" << g << ": fitted gamma* = " << fixed(r.fitted, 4) << " (target " << fixed(r.target, 4) << ")\n";
    }
    ctx.emit.csv("renewal_fit.csv", fit);
    ctx.emit.csv("renewal_survival.csv", surv);
    ctx.emit.csv("renewal_laplace.csv", lap);
    PlotOptions po{"intersection increment survival", "n", "P(G* > n)", true, true};
    ctx.emit.svg("renewal_survival.svg", svg_line_plot(series, po));
}

const std::map<std::string, std::set<std::string>>& produced_formats() {
    static const std::map<std::string, std::set<std::string>> m{{"forward", {"csv", "svg"}},
                                                                {"dual", {"csv", "jsonl"}},
                                                                {"criteria", {"csv"}},
                                                                {"fss", {"csv", "svg"}},
                                                                {"renewal", {"csv", "svg"}}};
    return m;
}

} // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"forward", "dual", "criteria", "fss", "renewal"};
    return names;
}

void apply_overrides(Config& c, std::optional<std::uint64_t> seed, std::optional<unsigned> threads) {
    if (seed) c.run.seed = *seed;
    if (threads) {
        if (*threads < 1) throw ConfigError("--threads", "must be >= 1");
        c.run.threads = *threads;
    }
    c.spec.seed = c.run.seed;
    c.spec.threads = c.run.threads;
    c.renewal.options.seed = c.run.seed;
    c.renewal.options.threads = c.run.threads;
}

int run_command(const std::string& name, const Config& config, const fs::path& out, std::ostream& log) {
    const auto it = produced_formats().find(name);
    if (it == produced_formats().end()) throw ConfigError("<command>", "unknown subcommand '" + name + "'");
    bool any = false;
    for (const auto& f : config.run.formats) any = any || it->second.count(f) > 0;
    if (!any) throw ConfigError("run.formats", "selects no format that '" + name + "' produces");

    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
    write_text(out / "config.resolved.json", emit_config(config).dump(2) + "\n");

    const auto start = std::chrono::steady_clock::now();
    Emitter emit(out, config.run.formats);
    Context ctx{config, emit, log, {}};
    if (name == "forward") cmd_forward(ctx);
    else if (name == "dual") cmd_dual(ctx);
    else if (name == "criteria") cmd_criteria(ctx);
    else if (name == "fss") cmd_fss(ctx);
    else cmd_renewal(ctx);

    RunManifest m = make_manifest(name, config);
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.outputs = emit.outputs();
    m.warnings = ctx.warnings;
    write_text(out / "manifest.json", m.to_json().dump(2) + "\n");
    return config.run.strict && !ctx.warnings.empty() ? kExitNumerical : kExitOk;
}

int execute(const std::string& name, const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed,
            std::optional<unsigned> threads, std::ostream& log, std::ostream& err) {
    try {
        Config c = load_config(config_path);
        apply_overrides(c, seed, threads);
        return run_command(name, c, out, log);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const BudgetRefusal& e) {
        err << "budget refusal: " << e.what() << "\n";
        return kExitBudget;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace seedbank
