#include "seedbank/dual.hpp"
#include "seedbank/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace seedbank {

std::string event_name(EventType t) {
    switch (t) {
    case EventType::Migrate: return "migrate";
    case EventType::Sleep: return "sleep";
    case EventType::Wake: return "wake";
    default: return "coalesce";
    }
}

LineageDynamics::LineageDynamics(const MigrationKernel& kernel, const SeedBankProfile& profile, Model model,
                                 std::vector<MigrationKernel> displacement)
    : geo_(kernel.geography()), profile_(profile), model_(model), exchange_(profile) {
    if (model == Model::M1 && profile.colours() != 1)
        throw std::invalid_argument("Model 1 has exactly one dormant colour (M = 0)");
    migration_ = kernel.support();
    migration_rate_ = kernel.total_rate();
    std::vector<double> w;
    for (const auto& e : migration_) w.push_back(e.rate);
    if (w.empty()) w.push_back(1.0);
    pick_migration_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    if (model == Model::M3) {
        if (static_cast<int>(displacement.size()) != profile.colours())
            throw std::invalid_argument("Model 3 needs one displacement kernel per colour");
        for (const auto& k : displacement) {
            if (!(k.geography() == geo_)) throw std::invalid_argument("displacement kernel lives on a different geography");
            if (!k.symmetric())
                throw std::invalid_argument("the Model 3 dual is implemented for symmetric displacement kernels only");
            if (std::abs(k.total_mass() - 1.0) > 1e-12)
                throw std::invalid_argument("displacement kernels must be probability rows (mass 1)");
            std::vector<Site> offs;
            std::vector<double> wt;
            for (Site j = 0; j < k.row().size(); ++j)
                if (k.row()[j] > 0.0) {
                    offs.push_back(j);
                    wt.push_back(k.row()[j]);
                }
            disp_offsets_.push_back(std::move(offs));
            pick_disp_.emplace_back(wt.begin(), wt.end());
            disp_weights_.push_back(std::move(wt));
        }
    } else if (!displacement.empty()) {
        throw std::invalid_argument("displacement kernels are only meaningful for Model 3");
    }
}

double LineageDynamics::exit_rate(ActivityState s) const {
    if (s.active()) return migration_rate_ + exchange_.chi();
    if (s.colour > profile_.M()) throw std::invalid_argument("dormant colour exceeds M");
    return profile_.e()[static_cast<std::size_t>(s.colour)];
}

LineageDynamics::Jump LineageDynamics::jump(const Lineage& l, Rng& rng) const {
    auto displaced = [&](Site site, int m) {
        if (model_ != Model::M3) return site;
        const auto mm = static_cast<std::size_t>(m);
        return geo_.add(site, disp_offsets_[mm][pick_disp_[mm](rng)]);
    };
    if (l.state.active()) {
        const double total = migration_rate_ + exchange_.chi();
        const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        if (u < migration_rate_)
            return {EventType::Migrate, geo_.add(l.site, migration_[pick_migration_(rng)].offset), ActivityState::Active()};
        const int m = exchange_.sample_colour(rng);
        return {EventType::Sleep, displaced(l.site, m), ActivityState::Dormant(m)};
    }
    return {EventType::Wake, displaced(l.site, l.state.colour), ActivityState::Active()};
}

LineageStep step_lineage(const Lineage& lineage, const LineageDynamics& dyn, Rng& rng) {
    if (!lineage.alive) throw std::invalid_argument("step_lineage on a coalesced lineage");
    const double rate = dyn.exit_rate(lineage.state);
    LineageStep out;
    out.lineage = lineage;
    if (rate <= 0.0) {
        out.elapsed = std::numeric_limits<double>::infinity();
        return out;
    }
    out.elapsed = std::exponential_distribution<double>(rate)(rng);
    const auto j = dyn.jump(lineage, rng);
    out.lineage.site = j.site;
    out.lineage.state = j.state;
    out.type = j.type;
    return out;
}

// ---------------------------------------------------------------------------------
// Coalescing system

namespace {
int find_root(std::vector<int>& parent, int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
        parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
        a = parent[static_cast<std::size_t>(a)];
    }
    return a;
}
} // namespace

CoalescentHistory run_coalescent(std::vector<Lineage> lineages, const LineageDynamics& dyn, double d, double horizon,
                                 Rng& rng, const CoalescentOptions& opt) {
    if (!(d >= 0.0)) throw std::invalid_argument("coalescence rate d must be >= 0");
    if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
    const std::size_t n = lineages.size();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    CoalescentHistory h;
    h.horizon = horizon;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> rates(n, 0.0);
    double t = 0.0;
    std::size_t alive = 0;
    for (const auto& l : lineages) alive += l.alive ? 1 : 0;
    for (;;) {
        double motion = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            rates[k] = lineages[k].alive ? dyn.exit_rate(lineages[k].state) : 0.0;
            motion += rates[k];
        }
        // global pair clock, thinned to co-located active pairs
        const double pairs = d * 0.5 * static_cast<double>(alive) * static_cast<double>(alive > 0 ? alive - 1 : 0);
        const double total = motion + pairs;
        if (total <= 0.0) break;
        t += std::exponential_distribution<double>(total)(rng);
        if (t > horizon) break;
        double u = unif(rng) * total;
        if (u < motion) {
            std::size_t k = n;
            for (std::size_t q = 0; q < n; ++q) {
                if (rates[q] <= 0.0) continue;
                k = q; // the last positive rate absorbs round-off at the upper edge
                if (u < rates[q]) break;
                u -= rates[q];
            }
            const auto j = dyn.jump(lineages[k], rng);
            lineages[k].site = j.site;
            lineages[k].state = j.state;
            if (opt.record_events && opt.record_motion)
                h.events.push_back({t, j.type, {lineages[k].id}, j.site, j.state.colour});
            continue;
        }
        // uniform unordered pair among alive lineages
        std::vector<std::size_t> idx;
        idx.reserve(alive);
        for (std::size_t k = 0; k < n; ++k)
            if (lineages[k].alive) idx.push_back(k);
        const auto a = std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng);
        auto b = std::uniform_int_distribution<std::size_t>(0, idx.size() - 2)(rng);
        if (b >= a) ++b;
        Lineage& la = lineages[idx[a]];
        Lineage& lb = lineages[idx[b]];
        if (la.site != lb.site || !la.state.active() || !lb.state.active()) continue;
        Lineage& keep = la.id < lb.id ? la : lb;
        Lineage& gone = la.id < lb.id ? lb : la;
        gone.alive = false;
        --alive;
        const int ra = find_root(parent, static_cast<int>(idx[a])), rb = find_root(parent, static_cast<int>(idx[b]));
        parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
        if (opt.record_events) h.events.push_back({t, EventType::Coalesce, {keep.id, gone.id}, keep.site, -1});
    }
    std::map<int, std::vector<int>> blocks;
    for (std::size_t k = 0; k < n; ++k) blocks[find_root(parent, static_cast<int>(k))].push_back(lineages[k].id);
    for (auto& [root, ids] : blocks) {
        std::sort(ids.begin(), ids.end());
        h.partition.push_back(ids);
    }
    std::sort(h.partition.begin(), h.partition.end());
    h.lineages = std::move(lineages);
    return h;
}

// ---------------------------------------------------------------------------------
// Pairs of independent lineages

namespace {

struct PairWalker {
    const LineageDynamics& dyn;
    Rng& rng;
    Lineage a, b;
    double ta = 0.0, tb = 0.0;

    double draw(const Lineage& l, double now) {
        const double r = dyn.exit_rate(l.state);
        return r > 0.0 ? now + std::exponential_distribution<double>(r)(rng) : std::numeric_limits<double>::infinity();
    }
    bool joint() const { return a.site == b.site && a.state.active() && b.state.active(); }
    void start(double now) {
        ta = draw(a, now);
        tb = draw(b, now);
    }
    // advance the lineage whose clock fires first; returns its time
    double fire() {
        if (ta <= tb) {
            const double now = ta;
            const auto j = dyn.jump(a, rng);
            a.site = j.site;
            a.state = j.state;
            ta = draw(a, now);
            return now;
        }
        const double now = tb;
        const auto j = dyn.jump(b, rng);
        b.site = j.site;
        b.state = j.state;
        tb = draw(b, now);
        return now;
    }
    double next() const { return std::min(ta, tb); }
};

std::vector<double> default_grid(double T) {
    std::vector<double> g;
    const double lo = std::min(1.0, T / 100.0);
    const int K = 64;
    for (int k = 0; k < K; ++k) g.push_back(lo * std::pow(T / lo, static_cast<double>(k) / (K - 1)));
    g.back() = T;
    return g;
}

} // namespace

HazardEstimate estimate_hazard(DualState u1, DualState u2, const LineageDynamics& dyn, double T,
                               const HazardOptions& opt) {
    if (!(T > 0.0)) throw std::invalid_argument("hazard horizon must be > 0");
    if (opt.replicas < 2) throw std::invalid_argument("hazard estimate needs >= 2 replicas");
    std::vector<double> grid = opt.grid.empty() ? default_grid(T) : opt.grid;
    if (!std::is_sorted(grid.begin(), grid.end()) || grid.back() > T * (1 + 1e-12))
        throw std::invalid_argument("hazard grid must be sorted within [0, T]");
    if (grid.back() < T) grid.push_back(T);
    const std::size_t K = grid.size();
    std::vector<double> values(opt.replicas * K, 0.0);

    parallel_for(opt.replicas, opt.threads, [&](std::size_t r) {
        Rng rng = make_rng(opt.seed, r, "hazard");
        LineageDynamics local = dyn;
        PairWalker w{local, rng, {u1.site, u1.state, 0, true}, {u2.site, u2.state, 1, true}};
        w.start(0.0);
        double now = 0.0, H = 0.0;
        std::size_t gi = 0;
        double* out = values.data() + r * K;
        while (now < T) {
            const double next = std::min(w.next(), T);
            const bool on = w.joint();
            while (gi < K && grid[gi] < next) {
                out[gi] = H + (on && grid[gi] > now ? grid[gi] - now : 0.0);
                ++gi;
            }
            if (on) H += next - now;
            if (next >= T) break;
            now = w.fire();
        }
        for (; gi < K; ++gi) out[gi] = H;
    });

    HazardEstimate est;
    std::vector<RunningStats> stats(K);
    for (std::size_t r = 0; r < opt.replicas; ++r)
        for (std::size_t k = 0; k < K; ++k) stats[k].add(values[r * K + k]);
    for (std::size_t k = 0; k < K; ++k) est.profile.push_back({grid[k], stats[k].mean(), stats[k].standard_error()});
    est.hazard = stats.back().mean();
    est.se = stats.back().standard_error();

    // growth over the last decade, by linear interpolation at T/10
    auto at = [&](double t) {
        if (t <= grid.front()) return est.profile.front().mean * (grid.front() > 0 ? t / grid.front() : 0.0);
        for (std::size_t k = 1; k < K; ++k)
            if (grid[k] >= t) {
                const double w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
                return est.profile[k - 1].mean * (1 - w) + est.profile[k].mean * w;
            }
        return est.hazard;
    };
    const double early = at(T / 10.0);
    est.last_decade_growth = est.hazard > 0.0 ? (est.hazard - early) / est.hazard : 0.0;
    est.plateau = est.last_decade_growth < 0.01;

    // linear asymptote on [T/2, T], and a per-replica intercept for its standard error
    std::vector<double> xs, ys;
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < K; ++k)
        if (grid[k] >= 0.5 * T) {
            xs.push_back(grid[k]);
            ys.push_back(est.profile[k].mean);
            ks.push_back(k);
        }
    if (xs.size() >= 2) {
        const LinearFit f = fit_line(xs, ys);
        est.slope = f.slope;
        est.intercept = f.intercept;
        // the fit is linear in the data, so the replica-level intercepts average to it
        RunningStats ic;
        std::vector<double> yr(xs.size());
        for (std::size_t r = 0; r < opt.replicas; ++r) {
            for (std::size_t q = 0; q < ks.size(); ++q) yr[q] = values[r * K + ks[q]];
            ic.add(fit_line(xs, yr).intercept);
        }
        est.intercept_se = ic.standard_error();
    }
    return est;
}

BurstRecord joint_activity_bursts(const LineageDynamics& dyn, double horizon, Rng& rng, DualState u1, DualState u2) {
    if (!(horizon > 0.0)) throw std::invalid_argument("burst horizon must be > 0");
    PairWalker w{dyn, rng, {u1.site, u1.state, 0, true}, {u2.site, u2.state, 1, true}};
    w.start(0.0);
    BurstRecord rec;
    double now = 0.0;
    bool on = w.joint();
    double zeta = on ? 0.0 : -1.0;
    while (true) {
        const double next = std::min(w.next(), horizon);
        if (next >= horizon) break;
        now = w.fire();
        const bool j = w.joint();
        if (j && !on) zeta = now;
        if (!j && on) {
            rec.intervals.emplace_back(zeta, now);
            rec.total += now - zeta;
        }
        on = j;
    }
    rec.completed = rec.intervals.size();
    if (on) rec.total += horizon - zeta;
    return rec;
}

// ---------------------------------------------------------------------------------
// Moment duality

std::size_t dual_state_index(const DualState& u, int colours) {
    return static_cast<std::size_t>(u.site) * static_cast<std::size_t>(colours + 1) +
           static_cast<std::size_t>(u.state.colour + 1);
}

DualState dual_state_from_index(std::size_t k, int colours) {
    const auto w = static_cast<std::size_t>(colours + 1);
    return {static_cast<Site>(k / w), ActivityState{static_cast<int>(k % w) - 1}};
}

std::vector<double> state_field(const SystemState& s) {
    const auto C = static_cast<std::size_t>(s.colours);
    std::vector<double> z(s.sites * (C + 1));
    for (std::size_t i = 0; i < s.sites; ++i) {
        z[i * (C + 1)] = s.x[i];
        for (std::size_t m = 0; m < C; ++m) z[i * (C + 1) + m + 1] = s.y[i * C + m];
    }
    return z;
}

namespace {

struct Transition {
    std::size_t to;
    double rate;
};

class DualGenerator {
public:
    explicit DualGenerator(const LineageDynamics& dyn)
        : colours_(dyn.profile().colours()), geo_(dyn.geography()) {
        const std::size_t S = geo_.size() * static_cast<std::size_t>(colours_ + 1);
        out_.resize(S);
        const auto& K = dyn.profile().K();
        const auto& e = dyn.profile().e();
        for (std::size_t k = 0; k < S; ++k) {
            const DualState u = dual_state_from_index(k, colours_);
            auto push = [&](Site site, ActivityState st, double rate) {
                if (rate > 0.0) out_[k].push_back({dual_state_index({site, st}, colours_), rate});
            };
            if (u.state.active()) {
                for (const auto& en : dyn.migration_support()) push(geo_.add(u.site, en.offset), ActivityState::Active(), en.rate);
                for (int m = 0; m < colours_; ++m) {
                    const double r = K[static_cast<std::size_t>(m)] * e[static_cast<std::size_t>(m)];
                    if (dyn.model() == Model::M3) {
                        const auto& offs = dyn.displacement_offsets(m);
                        const auto& w = dyn.displacement_weights(m);
                        for (std::size_t q = 0; q < offs.size(); ++q)
                            push(geo_.add(u.site, geo_.neg(offs[q])), ActivityState::Dormant(m), r * w[q]);
                    } else {
                        push(u.site, ActivityState::Dormant(m), r);
                    }
                }
            } else {
                const double r = e[static_cast<std::size_t>(u.state.colour)];
                if (dyn.model() == Model::M3) {
                    const auto& offs = dyn.displacement_offsets(u.state.colour);
                    const auto& w = dyn.displacement_weights(u.state.colour);
                    for (std::size_t q = 0; q < offs.size(); ++q)
                        push(geo_.add(u.site, offs[q]), ActivityState::Active(), r * w[q]);
                } else {
                    push(u.site, ActivityState::Active(), r);
                }
            }
            double total = 0.0;
            for (const auto& tr : out_[k]) total += tr.rate;
            exit_.push_back(total);
        }
    }
    std::size_t size() const { return out_.size(); }
    const std::vector<Transition>& out(std::size_t k) const { return out_[k]; }
    double exit(std::size_t k) const { return exit_[k]; }
    double max_exit() const { return exit_.empty() ? 0.0 : *std::max_element(exit_.begin(), exit_.end()); }

private:
    int colours_;
    Geography geo_;
    std::vector<std::vector<Transition>> out_;
    std::vector<double> exit_;
};

// Uniformised exp(tQ) applied to the initial distribution `p0` (row vector), where
// the generator is given by `apply` : v -> vQ restricted to off-diagonal mass, and
// `exits` the diagonal. Returns the distribution and the Poisson tail bound.
template <class Apply>
std::pair<std::vector<double>, double> uniformise_vector(std::vector<double> v, const std::vector<double>& exits,
                                                         double lambda, double t, Apply apply) {
    std::vector<double> acc(v.size(), 0.0);
    if (lambda <= 0.0 || t == 0.0) return {v, 0.0};
    const double mean = lambda * t;
    std::size_t kmax = static_cast<std::size_t>(mean + 10.0 * std::sqrt(mean) + 20.0);
    while (boost::math::gamma_p(static_cast<double>(kmax + 1), mean) > 1e-13) kmax += 1 + kmax / 4;
    const double tail = boost::math::gamma_p(static_cast<double>(kmax + 1), mean);
    std::vector<double> next(v.size());
    double logw = -mean;
    for (std::size_t k = 0; k <= kmax; ++k) {
        if (k > 0) {
            logw += std::log(mean) - std::log(static_cast<double>(k));
            for (std::size_t s = 0; s < v.size(); ++s) next[s] = v[s] * (1.0 - exits[s] / lambda);
            apply(v, next, lambda);
            std::swap(v, next);
        }
        const double w = std::exp(logw);
        for (std::size_t s = 0; s < v.size(); ++s) acc[s] += w * v[s];
    }
    return {acc, tail};
}

} // namespace

MomentEstimate moment_dual_expectation(std::span<const double> field, const LineageDynamics& dyn, double t, DualState u0,
                                       const MomentOptions& opt) {
    if (!(t >= 0.0)) throw std::invalid_argument("dual time must be >= 0");
    const int C = dyn.profile().colours();
    const std::size_t S = dyn.geography().size() * static_cast<std::size_t>(C + 1);
    if (field.size() != S) throw std::invalid_argument("mean field must be defined on every dual state");
    const std::size_t start = dual_state_index(u0, C);
    if (start >= S) throw std::out_of_range("initial dual state out of range");
    if (opt.exact) {
        if (S > opt.size_cap)
            throw std::invalid_argument("exact dual expectation refused: " + std::to_string(S) + " dual states exceed the cap");
        const DualGenerator gen(dyn);
        std::vector<double> v(S, 0.0), exits(S);
        v[start] = 1.0;
        for (std::size_t k = 0; k < S; ++k) exits[k] = gen.exit(k);
        auto [dist, tail] = uniformise_vector(std::move(v), exits, gen.max_exit(), t,
                                              [&](const std::vector<double>& cur, std::vector<double>& next, double lam) {
                                                  for (std::size_t k = 0; k < S; ++k) {
                                                      if (cur[k] == 0.0) continue;
                                                      for (const auto& tr : gen.out(k)) next[tr.to] += cur[k] * tr.rate / lam;
                                                  }
                                              });
        CompensatedSum sum;
        double fmax = 0.0;
        for (std::size_t k = 0; k < S; ++k) {
            sum.add(dist[k] * field[k]);
            fmax = std::max(fmax, std::abs(field[k]));
        }
        return {sum.value(), tail * fmax};
    }
    RunningStats stats;
    LineageDynamics local = dyn;
    for (std::size_t r = 0; r < opt.replicas; ++r) {
        Rng rng = make_rng(opt.seed, r, "dual-moment");
        Lineage l{u0.site, u0.state, 0, true};
        double clock = 0.0;
        for (;;) {
            const LineageStep st = step_lineage(l, local, rng);
            clock += st.elapsed;
            if (clock > t) break;
            l = st.lineage;
        }
        stats.add(field[dual_state_index({l.site, l.state}, C)]);
    }
    return {stats.mean(), stats.standard_error()};
}

MomentEstimate second_moment_dual(const std::vector<double>& z0, const LineageDynamics& dyn, double d, double t,
                                  DualState u1, DualState u2, const MomentOptions& opt) {
    if (!(t >= 0.0)) throw std::invalid_argument("dual time must be >= 0");
    if (!(d >= 0.0)) throw std::invalid_argument("coalescence rate d must be >= 0");
    const int C = dyn.profile().colours();
    const std::size_t S = dyn.geography().size() * static_cast<std::size_t>(C + 1);
    if (z0.size() != S) throw std::invalid_argument("initial configuration must be defined on every dual state");
    const std::size_t a0 = dual_state_index(u1, C), b0 = dual_state_index(u2, C);
    if (opt.exact) {
        const std::size_t P = S * S + S;
        if (S > opt.size_cap || P > (std::size_t{1} << 22))
            throw std::invalid_argument("exact pair dual refused: pair space too large");
        const DualGenerator gen(dyn);
        auto coalescible = [&](std::size_t a, std::size_t b) {
            return a == b && dual_state_from_index(a, C).state.active();
        };
        std::vector<double> v(P, 0.0), exits(P, 0.0);
        v[a0 * S + b0] = 1.0;
        for (std::size_t a = 0; a < S; ++a) {
            for (std::size_t b = 0; b < S; ++b) exits[a * S + b] = gen.exit(a) + gen.exit(b) + (coalescible(a, b) ? d : 0.0);
            exits[S * S + a] = gen.exit(a);
        }
        const double lambda = *std::max_element(exits.begin(), exits.end());
        auto [dist, tail] = uniformise_vector(std::move(v), exits, lambda, t,
                                              [&](const std::vector<double>& cur, std::vector<double>& next, double lam) {
                                                  for (std::size_t a = 0; a < S; ++a) {
                                                      for (std::size_t b = 0; b < S; ++b) {
                                                          const double w = cur[a * S + b];
                                                          if (w == 0.0) continue;
                                                          for (const auto& tr : gen.out(a)) next[tr.to * S + b] += w * tr.rate / lam;
                                                          for (const auto& tr : gen.out(b)) next[a * S + tr.to] += w * tr.rate / lam;
                                                          if (coalescible(a, b)) next[S * S + a] += w * d / lam;
                                                      }
                                                      const double w = cur[S * S + a];
                                                      if (w == 0.0) continue;
                                                      for (const auto& tr : gen.out(a)) next[S * S + tr.to] += w * tr.rate / lam;
                                                  }
                                              });
        CompensatedSum sum;
        for (std::size_t a = 0; a < S; ++a) {
            for (std::size_t b = 0; b < S; ++b) sum.add(dist[a * S + b] * z0[a] * z0[b]);
            sum.add(dist[S * S + a] * z0[a]);
        }
        return {sum.value(), tail};
    }
    RunningStats stats;
    LineageDynamics local = dyn;
    for (std::size_t r = 0; r < opt.replicas; ++r) {
        Rng rng = make_rng(opt.seed, r, "dual-pair");
        CoalescentOptions co;
        co.record_events = false;
        auto h = run_coalescent({{u1.site, u1.state, 0, true}, {u2.site, u2.state, 1, true}}, local, d, t, rng, co);
        double prod = 1.0;
        for (const auto& l : h.lineages)
            if (l.alive) prod *= z0[dual_state_index({l.site, l.state}, C)];
        stats.add(prod);
    }
    return {stats.mean(), stats.standard_error()};
}

} // namespace seedbank
