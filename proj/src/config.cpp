#include "seedbank/config.hpp"
#include "seedbank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace seedbank {

using json = nlohmann::json;

namespace {

const json& empty_object() {
    static const json e = json::object();
    return e;
}

// Walks one JSON object, remembering which keys were consumed so that anything left
// over can be reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    const json* find(const std::string& k) {
        seen_.insert(k);
        const auto it = j_.find(k);
        return it == j_.end() ? nullptr : &*it;
    }

    double number(const std::string& k, double def) {
        const json* p = find(k);
        if (!p) return def;
        return as_number(*p, key(k));
    }

    std::optional<double> optional_number(const std::string& k) {
        const json* p = find(k);
        if (!p || p->is_null()) return std::nullopt;
        return as_number(*p, key(k));
    }

    long long integer(const std::string& k, long long def) {
        const json* p = find(k);
        if (!p) return def;
        return as_integer(*p, key(k));
    }

    std::uint64_t unsigned_integer(const std::string& k, std::uint64_t def) {
        const json* p = find(k);
        if (!p) return def;
        if (p->is_number_unsigned()) return p->get<std::uint64_t>();
        const long long v = as_integer(*p, key(k));
        if (v < 0) throw ConfigError(key(k), "must be >= 0");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const std::string& k, bool def) {
        const json* p = find(k);
        if (!p) return def;
        if (!p->is_boolean()) throw ConfigError(key(k), "expected true or false");
        return p->get<bool>();
    }

    std::string string(const std::string& k, const std::string& def, std::initializer_list<const char*> allowed = {}) {
        const json* p = find(k);
        if (!p) return check_allowed(def, k, allowed);
        if (!p->is_string()) throw ConfigError(key(k), "expected a string");
        return check_allowed(p->get<std::string>(), k, allowed);
    }

    std::vector<double> numbers(const std::string& k, std::vector<double> def) {
        const json* p = find(k);
        if (!p) return def;
        if (!p->is_array()) throw ConfigError(key(k), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < p->size(); ++i) out.push_back(as_number((*p)[i], key(k) + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<long long> integers(const std::string& k, std::vector<long long> def) {
        const json* p = find(k);
        if (!p) return def;
        if (!p->is_array()) throw ConfigError(key(k), "expected an array of integers");
        std::vector<long long> out;
        for (std::size_t i = 0; i < p->size(); ++i) out.push_back(as_integer((*p)[i], key(k) + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<std::string> strings(const std::string& k, std::vector<std::string> def,
                                     std::initializer_list<const char*> allowed = {}) {
        const json* p = find(k);
        if (!p) return def;
        if (!p->is_array()) throw ConfigError(key(k), "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < p->size(); ++i) {
            const std::string kk = k + "[" + std::to_string(i) + "]";
            if (!(*p)[i].is_string()) throw ConfigError(key(kk), "expected a string");
            out.push_back(check_allowed((*p)[i].get<std::string>(), kk, allowed));
        }
        return out;
    }

    Reader object(const std::string& k) {
        const json* p = find(k);
        return Reader(p ? *p : empty_object(), key(k));
    }

    const json* array(const std::string& k) {
        const json* p = find(k);
        if (p && !p->is_array()) throw ConfigError(key(k), "expected an array");
        return p;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }

private:
    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ConfigError(path, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
        return d;
    }
    static long long as_integer(const json& v, const std::string& path) {
        if (v.is_number_integer()) return v.get<long long>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
        }
        throw ConfigError(path, "expected an integer");
    }
    std::string check_allowed(std::string v, const std::string& k, std::initializer_list<const char*> allowed) const {
        if (allowed.size() == 0) return v;
        std::string list;
        for (const char* a : allowed) {
            if (v == a) return v;
            list += list.empty() ? a : std::string(", ") + a;
        }
        throw ConfigError(key(k), "unknown value '" + v + "' (expected one of " + list + ")");
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) throw ConfigError(path, msg);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

MRule read_mrule(Reader r) {
    MRule m;
    const std::string rule = r.string("rule", "constant", {"constant", "power"});
    if (rule == "constant") {
        m.kind = MRule::Kind::Constant;
        const long long v = r.integer("value", 0);
        require(v >= 0, r.key("value"), "must be >= 0");
        m.value = static_cast<double>(v);
    } else {
        m.kind = MRule::Kind::Power;
        m.value = r.number("prefactor", 1.0);
        m.exponent = r.number("exponent", 1.0);
        require(m.value > 0.0, r.key("prefactor"), "must be > 0");
    }
    r.finish();
    return m;
}

json emit_mrule(const MRule& m) {
    if (m.kind == MRule::Kind::Constant) return {{"rule", "constant"}, {"value", static_cast<long long>(m.value)}};
    return {{"rule", "power"}, {"prefactor", m.value}, {"exponent", m.exponent}};
}

void check_gamma(double g, const std::string& path) { require(g > 0.0 && g <= 1.0, path, "gamma must lie in (0,1], got " + fmt(g)); }

} // namespace

Config parse_config(const json& j) {
    Config c;
    Reader root(j, "");
    ExperimentSpec& s = c.spec;

    {
        Reader r = root.object("run");
        c.run.seed = r.unsigned_integer("seed", c.run.seed);
        const long long th = r.integer("threads", c.run.threads);
        require(th >= 1 && th <= 1024, r.key("threads"), "must lie in [1, 1024]");
        c.run.threads = static_cast<unsigned>(th);
        c.run.formats = r.strings("formats", c.run.formats, {"csv", "jsonl", "svg"});
        require(!c.run.formats.empty(), r.key("formats"), "must select at least one format");
        c.run.budget = r.number("budget", c.run.budget);
        require(c.run.budget > 0.0, r.key("budget"), "must be > 0");
        c.run.strict = r.boolean("strict", c.run.strict);
        r.finish();
    }
    {
        Reader r = root.object("geography");
        const std::string fam = r.string("family", "torus", {"torus", "hierarchical"});
        const long long n = r.integer("n", c.n);
        require(n >= 1, r.key("n"), "must be >= 1");
        c.n = static_cast<int>(n);
        if (fam == "torus") {
            s.family = GeographyFamily::Torus;
            const long long d = r.integer("dimension", 1);
            require(d >= 1 && d <= 8, r.key("dimension"), "must lie in [1, 8]");
            s.dimension = static_cast<int>(d);
        } else {
            s.family = GeographyFamily::Hierarchical;
            const long long N = r.integer("order", 2);
            require(N >= 2, r.key("order"), "must be >= 2");
            s.order = static_cast<int>(N);
        }
        r.finish();
    }
    {
        const auto ladder = root.integers("ladder", {c.n});
        require(!ladder.empty(), "ladder", "must not be empty");
        s.ladder.clear();
        for (std::size_t k = 0; k < ladder.size(); ++k) {
            require(ladder[k] >= 1, "ladder[" + std::to_string(k) + "]", "must be >= 1");
            require(k == 0 || ladder[k] > ladder[k - 1], "ladder", "must be strictly increasing");
            s.ladder.push_back(static_cast<int>(ladder[k]));
        }
    }
    {
        Reader r = root.object("kernel");
        const std::string type = r.string("type", "nearest_neighbour", {"nearest_neighbour", "heavy_tail", "hierarchical"});
        if (type == "nearest_neighbour") {
            NearestNeighbour k;
            k.rate = r.number("rate", k.rate);
            require(k.rate > 0.0, r.key("rate"), "must be > 0");
            s.kernel = k;
        } else if (type == "heavy_tail") {
            HeavyTail k;
            k.Q = r.number("Q", k.Q);
            k.q = r.number("q", k.q);
            require(k.Q > 0.0, r.key("Q"), "must be > 0");
            require(k.q > 0.0 && k.q < 2.0, r.key("q"), "must lie in (0,2)");
            s.kernel = k;
        } else {
            HierarchicalRates k;
            k.c = r.number("c", k.c);
            require(k.c > 0.0, r.key("c"), "must be > 0");
            s.kernel = k;
        }
        s.kernel_options.symmetrize = r.boolean("symmetrize", false);
        s.kernel_options.fold = r.boolean("fold", true);
        s.kernel_options.fold_epsilon = r.number("fold_epsilon", 1e-9);
        require(s.kernel_options.fold_epsilon > 0.0, r.key("fold_epsilon"), "must be > 0");
        const long long cap = r.integer("shell_cap", 4096);
        require(cap >= 1, r.key("shell_cap"), "must be >= 1");
        s.kernel_options.shell_cap = static_cast<std::size_t>(cap);
        r.finish();
    }
    {
        Reader r = root.object("seedbank");
        const std::string type = r.string("type", "explicit", {"explicit", "polynomial", "hierarchical"});
        if (type == "explicit") {
            s.bank = ExplicitBank{};
            s.K = r.numbers("K", {1.0});
            s.e = r.numbers("e", {1.0});
            require(!s.K.empty(), r.key("K"), "must not be empty");
            require(s.K.size() == s.e.size(), r.key("e"), "must have as many entries as K");
            for (std::size_t m = 0; m < s.K.size(); ++m) {
                require(s.K[m] > 0.0, r.key("K[" + std::to_string(m) + "]"), "must be > 0");
                require(s.e[m] > 0.0, r.key("e[" + std::to_string(m) + "]"), "must be > 0");
            }
        } else if (type == "polynomial") {
            PolynomialBank p;
            p.A = r.number("A", p.A);
            p.alpha = r.number("alpha", p.alpha);
            p.B = r.number("B", p.B);
            p.beta = r.number("beta", p.beta);
            require(p.A > 0.0, r.key("A"), "must be > 0");
            require(p.B > 0.0, r.key("B"), "must be > 0");
            require(p.alpha >= 0.0, r.key("alpha"), "must be >= 0");
            require(p.beta >= 0.0, r.key("beta"), "must be >= 0");
            s.bank = p;
            s.M = read_mrule(r.object("M"));
        } else {
            HierarchicalBank h;
            h.K = r.number("K", h.K);
            h.e = r.number("e", h.e);
            const long long N = r.integer("N", h.N);
            require(N >= 2, r.key("N"), "must be >= 2");
            h.N = static_cast<int>(N);
            require(h.K > 0.0, r.key("K"), "must be > 0");
            require(h.e > 0.0, r.key("e"), "must be > 0");
            require(h.K * h.e < h.N, r.key("K"), "needs K e < N");
            s.bank = h;
            s.M = read_mrule(r.object("M"));
        }
        r.finish();
    }
    {
        const std::string m = root.string("model", "M1", {"M1", "M2", "M3"});
        s.model = m == "M1" ? Model::M1 : m == "M2" ? Model::M2 : Model::M3;
    }
    {
        Reader r = root.object("diffusion");
        const std::string type = r.string("type", "fisher_wright", {"fisher_wright", "ohta_kimura", "custom"});
        if (type == "custom") {
            s.g_kind = DiffusionKind::Custom;
            s.g_grid = r.numbers("grid", {});
            try {
                (void)DiffusionFunction::custom(s.g_grid);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(r.key("grid"), e.what());
            }
        } else {
            s.g_kind = type == "fisher_wright" ? DiffusionKind::FisherWright : DiffusionKind::OhtaKimura;
            s.g_rate = r.number("d", 1.0);
            require(s.g_rate > 0.0, r.key("d"), "must be > 0");
        }
        r.finish();
    }
    {
        Reader r = root.object("initial");
        s.theta = r.number("theta", 0.5);
        require(s.theta >= 0.0 && s.theta <= 1.0, r.key("theta"), "must lie in [0,1], got " + fmt(s.theta));
        s.initial = r.string("law", "constant", {"constant", "bernoulli"}) == "constant" ? InitialLaw::Constant : InitialLaw::Bernoulli;
        r.finish();
    }
    {
        Reader r = root.object("integrator");
        s.dt = r.number("dt", 0.0);
        require(s.dt >= 0.0, r.key("dt"), "must be >= 0 (0 selects the default step)");
        const std::string b = r.string("boundary", "moment_matching", {"moment_matching", "clamp"});
        s.boundary = b == "clamp" ? BoundaryScheme::Clamp : BoundaryScheme::MomentMatching;
        r.finish();
    }
    {
        Reader r = root.object("forward");
        const long long R = r.integer("replicas", static_cast<long long>(c.forward.replicas));
        require(R >= 1, r.key("replicas"), "must be >= 1");
        c.forward.replicas = static_cast<std::size_t>(R);
        c.forward.horizon = r.number("horizon", c.forward.horizon);
        require(c.forward.horizon > 0.0, r.key("horizon"), "must be > 0");
        c.forward.observe_every = r.number("observe_every", c.forward.observe_every);
        require(c.forward.observe_every > 0.0, r.key("observe_every"), "must be > 0");
        r.finish();
    }
    {
        Reader r = root.object("dual");
        if (const json* arr = r.array("lineages")) {
            c.dual.lineages.clear();
            for (std::size_t i = 0; i < arr->size(); ++i) {
                Reader l((*arr)[i], r.key("lineages[" + std::to_string(i) + "]"));
                const long long site = l.integer("site", 0);
                const long long colour = l.integer("colour", -1);
                require(site >= 0, l.key("site"), "must be >= 0");
                require(colour >= -1, l.key("colour"), "must be >= -1 (-1 is active)");
                c.dual.lineages.push_back({static_cast<Site>(site), ActivityState{static_cast<int>(colour)}});
                l.finish();
            }
            require(!c.dual.lineages.empty(), r.key("lineages"), "must not be empty");
        }
        c.dual.d = r.number("d", c.dual.d);
        require(c.dual.d >= 0.0, r.key("d"), "must be >= 0");
        c.dual.horizon = r.number("horizon", c.dual.horizon);
        require(c.dual.horizon > 0.0, r.key("horizon"), "must be > 0");
        const long long R = r.integer("replicas", static_cast<long long>(c.dual.replicas));
        require(R >= 1, r.key("replicas"), "must be >= 1");
        c.dual.replicas = static_cast<std::size_t>(R);
        c.dual.record_motion = r.boolean("record_motion", c.dual.record_motion);
        Reader h = r.object("hazard");
        c.dual.hazard = h.boolean("enabled", c.dual.hazard);
        c.dual.hazard_T = h.number("T", c.dual.hazard_T);
        require(c.dual.hazard_T > 0.0, h.key("T"), "must be > 0");
        const long long HR = h.integer("replicas", static_cast<long long>(c.dual.hazard_replicas));
        require(HR >= 2, h.key("replicas"), "must be >= 2");
        c.dual.hazard_replicas = static_cast<std::size_t>(HR);
        h.finish();
        r.finish();
    }
    {
        Reader r = root.object("criteria");
        if (const json* arr = r.array("examples")) {
            for (std::size_t i = 0; i < arr->size(); ++i) {
                Reader e((*arr)[i], r.key("examples[" + std::to_string(i) + "]"));
                const std::string type = e.string("type", "euclidean", {"euclidean", "heavy_tail", "hierarchical"});
                if (type == "euclidean") {
                    EuclideanExample x;
                    x.d = e.number("d", x.d);
                    x.gamma = e.number("gamma", x.gamma);
                    require(x.d >= 1.0, e.key("d"), "must be >= 1");
                    check_gamma(x.gamma, e.key("gamma"));
                    c.criteria.examples.push_back(x);
                } else if (type == "heavy_tail") {
                    HeavyTailExample x;
                    x.q = e.number("q", x.q);
                    x.gamma = e.number("gamma", x.gamma);
                    require(x.q > 0.0 && x.q < 2.0, e.key("q"), "must lie in (0,2)");
                    check_gamma(x.gamma, e.key("gamma"));
                    c.criteria.examples.push_back(x);
                } else {
                    HierarchicalExample x;
                    x.N = e.number("N", x.N);
                    x.c = e.number("c", x.c);
                    x.K = e.number("K", x.K);
                    x.e = e.number("e", x.e);
                    try {
                        (void)classify_example(x);
                    } catch (const std::invalid_argument& err) {
                        throw ConfigError(e.key("type"), err.what());
                    }
                    c.criteria.examples.push_back(x);
                }
                e.finish();
            }
        }
        if (const json* arr = r.array("integrals")) {
            for (std::size_t i = 0; i < arr->size(); ++i) {
                Reader e((*arr)[i], r.key("integrals[" + std::to_string(i) + "]"));
                IntegralSpec spec;
                Reader a = e.object("return_probability");
                const std::string type = a.string("type", "power_law", {"power_law", "table"});
                if (type == "power_law") {
                    spec.a.c = a.number("c", spec.a.c);
                    spec.a.a = a.number("a", spec.a.a);
                    require(spec.a.c > 0.0, a.key("c"), "must be > 0");
                } else {
                    spec.a.tabulated = true;
                    spec.a.t = a.numbers("t", {});
                    spec.a.values = a.numbers("values", {});
                    try {
                        (void)ReturnProbability::tabulated(spec.a.t, spec.a.values);
                    } catch (const std::invalid_argument& err) {
                        throw ConfigError(a.key("t"), err.what());
                    }
                }
                a.finish();
                const std::string mode = e.string("mode", "finite_rho", {"finite_rho", "infinite_rho"});
                spec.mode = mode == "finite_rho" ? IntegralSpec::Mode::FiniteRho : IntegralSpec::Mode::InfiniteRho;
                spec.gamma = e.number("gamma", spec.gamma);
                check_gamma(spec.gamma, e.key("gamma"));
                spec.horizon = e.number("horizon", spec.horizon);
                require(spec.horizon > 10.0, e.key("horizon"), "must exceed 10");
                require(!spec.a.tabulated || spec.horizon <= spec.a.t.back(), e.key("horizon"),
                        "lies beyond the tabulated return probabilities");
                e.finish();
                c.criteria.integrals.push_back(spec);
            }
        }
        r.finish();
    }
    {
        Reader r = root.object("fss");
        FssSection& f = c.fss;
        const long long R = r.integer("replicas", static_cast<long long>(s.replicas));
        require(R >= 1, r.key("replicas"), "must be >= 1");
        s.replicas = static_cast<std::size_t>(R);
        s.s_grid = r.numbers("s_grid", s.s_grid);
        require(!s.s_grid.empty(), r.key("s_grid"), "must not be empty");
        for (std::size_t k = 0; k < s.s_grid.size(); ++k) {
            require(s.s_grid[k] >= 0.0, r.key("s_grid"), "entries must be >= 0");
            require(k == 0 || s.s_grid[k] > s.s_grid[k - 1], r.key("s_grid"), "must be strictly increasing");
        }
        const std::string unit = r.string("unit", "beta_n", {"beta_n", "beta_star", "absolute"});
        s.unit = unit == "beta_n" ? TimeUnit::BetaN : unit == "beta_star" ? TimeUnit::BetaStar : TimeUnit::Absolute;
        f.observables = r.strings("observables", f.observables, {"theta_hat", "theta_x", "diversity", "depth_moments"});
        require(!f.observables.empty(), r.key("observables"), "must select at least one observable");
        f.tasks = r.strings("tasks", f.tasks, {"paths", "fg", "reference", "trapping", "clustering"});
        require(!f.tasks.empty(), r.key("tasks"), "must select at least one task");

        Reader g = r.object("fg");
        f.fg.theta_grid = g.numbers("theta_grid", f.fg.theta_grid);
        require(!f.fg.theta_grid.empty(), g.key("theta_grid"), "must not be empty");
        for (double th : f.fg.theta_grid) require(th >= 0.0 && th <= 1.0, g.key("theta_grid"), "entries must lie in [0,1]");
        const long long FR = g.integer("replicas", static_cast<long long>(f.fg.replicas));
        require(FR >= 2, g.key("replicas"), "must be >= 2");
        f.fg.replicas = static_cast<std::size_t>(FR);
        f.fg.burn_in_factor = g.number("burn_in_factor", f.fg.burn_in_factor);
        require(f.fg.burn_in_factor >= 0.0, g.key("burn_in_factor"), "must be >= 0");
        f.fg.window_factor = g.number("window_factor", f.fg.window_factor);
        require(f.fg.window_factor > 0.0, g.key("window_factor"), "must be > 0");
        f.fg.sample_interval = g.number("sample_interval", f.fg.sample_interval);
        require(f.fg.sample_interval > 0.0, g.key("sample_interval"), "must be > 0");
        f.fg.relaxation = g.optional_number("relaxation");
        require(!f.fg.relaxation || *f.fg.relaxation > 0.0, g.key("relaxation"), "must be > 0");
        Reader b = g.object("bhat");
        f.bhat_source = b.string("source", f.bhat_source, {"none", "dual", "value"});
        f.bhat_value = b.number("value", f.bhat_value);
        require(f.bhat_value >= 0.0, b.key("value"), "must be >= 0");
        f.hazard_T = b.number("hazard_T", f.hazard_T);
        require(f.hazard_T > 0.0, b.key("hazard_T"), "must be > 0");
        const long long HR = b.integer("hazard_replicas", static_cast<long long>(f.hazard_replicas));
        require(HR >= 2, b.key("hazard_replicas"), "must be >= 2");
        f.hazard_replicas = static_cast<std::size_t>(HR);
        b.finish();
        g.finish();

        Reader ref = r.object("reference");
        f.reference_source = ref.string("source", f.reference_source, {"fisher_wright", "fg_table"});
        f.reference_d_star = ref.optional_number("d_star");
        require(!f.reference_d_star || *f.reference_d_star >= 0.0, ref.key("d_star"), "must be >= 0");
        const long long RR = ref.integer("replicas", static_cast<long long>(f.reference_replicas));
        require(RR >= 1, ref.key("replicas"), "must be >= 1");
        f.reference_replicas = static_cast<std::size_t>(RR);
        f.reference_ds = ref.number("ds", f.reference_ds);
        require(f.reference_ds > 0.0, ref.key("ds"), "must be > 0");
        ref.finish();

        Reader t = r.object("trapping");
        const long long TR = t.integer("replicas", static_cast<long long>(f.trapping.replicas));
        require(TR >= 1, t.key("replicas"), "must be >= 1");
        f.trapping.replicas = static_cast<std::size_t>(TR);
        f.trapping.horizon = t.number("horizon", f.trapping.horizon);
        require(f.trapping.horizon > 0.0, t.key("horizon"), "must be > 0");
        f.trapping.epsilon = t.number("epsilon", f.trapping.epsilon);
        require(f.trapping.epsilon > 0.0 && f.trapping.epsilon < 0.5, t.key("epsilon"), "must lie in (0, 0.5)");
        f.trapping.check_interval = t.number("check_interval", f.trapping.check_interval);
        require(f.trapping.check_interval > 0.0, t.key("check_interval"), "must be > 0");
        t.finish();

        Reader cl = r.object("clustering");
        f.clustering.probe_times = cl.numbers("probe_times", f.clustering.probe_times);
        for (std::size_t k = 0; k < f.clustering.probe_times.size(); ++k) {
            require(f.clustering.probe_times[k] >= 0.0, cl.key("probe_times"), "entries must be >= 0");
            require(k == 0 || f.clustering.probe_times[k] > f.clustering.probe_times[k - 1], cl.key("probe_times"),
                    "must be strictly increasing");
        }
        const long long CR = cl.integer("replicas", static_cast<long long>(f.clustering.replicas));
        require(CR >= 2, cl.key("replicas"), "must be >= 2");
        f.clustering.replicas = static_cast<std::size_t>(CR);
        f.clustering.tolerance = cl.number("tolerance", f.clustering.tolerance);
        require(f.clustering.tolerance > 0.0, cl.key("tolerance"), "must be > 0");
        cl.finish();
        r.finish();
    }
    {
        Reader r = root.object("renewal");
        RenewalSection& rn = c.renewal;
        rn.gammas = r.numbers("gammas", rn.gammas);
        require(!rn.gammas.empty(), r.key("gammas"), "must not be empty");
        for (double g : rn.gammas) require(g > 0.5 && g <= 1.0, r.key("gammas"), "entries must lie in (1/2, 1], got " + fmt(g));
        rn.options.horizon = r.number("horizon", rn.options.horizon);
        require(rn.options.horizon >= 100.0 && rn.options.horizon <= 1e15, r.key("horizon"), "must lie in [100, 1e15]");
        const long long inc = r.integer("increments", static_cast<long long>(rn.options.increments));
        require(inc >= 1000, r.key("increments"), "must be >= 1000");
        rn.options.increments = static_cast<std::size_t>(inc);
        rn.options.fit_lo = r.number("fit_lo", rn.options.fit_lo);
        require(rn.options.fit_lo >= 1.0, r.key("fit_lo"), "must be >= 1");
        const long long mt = r.integer("min_tail_count", static_cast<long long>(rn.options.min_tail_count));
        require(mt >= 1, r.key("min_tail_count"), "must be >= 1");
        rn.options.min_tail_count = static_cast<std::size_t>(mt);
        const long long ls = r.integer("laplace_samples", static_cast<long long>(rn.options.laplace_samples));
        require(ls >= 0, r.key("laplace_samples"), "must be >= 0");
        rn.options.laplace_samples = static_cast<std::size_t>(ls);
        const long long lg = r.integer("laplace_sites", static_cast<long long>(rn.options.laplace_sites));
        require(lg >= 2, r.key("laplace_sites"), "must be >= 2");
        rn.options.laplace_sites = static_cast<std::size_t>(lg);
        rn.options.lambdas = r.numbers("lambdas", rn.options.lambdas);
        for (double l : rn.options.lambdas) require(l > 0.0, r.key("lambdas"), "entries must be > 0");
        r.finish();
    }
    root.finish();

    s.seed = c.run.seed;
    s.threads = c.run.threads;
    s.budget = c.run.budget;
    c.renewal.options.seed = c.run.seed;
    c.renewal.options.threads = c.run.threads;

    // combinations that only the model layer can judge
    std::vector<int> sizes = s.ladder;
    sizes.push_back(c.n);
    for (int n : sizes) {
        try {
            const SystemParams p = ladder_params(s, n);
            if (n == c.n) {
                for (std::size_t i = 0; i < c.dual.lineages.size(); ++i) {
                    const DualState& u = c.dual.lineages[i];
                    const std::string path = "dual.lineages[" + std::to_string(i) + "]";
                    require(u.site < p.kernel.geography().size(), path + ".site", "outside the geography");
                    require(u.state.colour < p.profile.colours(), path + ".colour", "exceeds the seed-bank depth");
                }
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(n == c.n ? "geography" : "ladder", e.what());
        }
    }
    return c;
}

Config parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

json emit_config(const Config& c) {
    const ExperimentSpec& s = c.spec;
    json j;
    j["run"] = {{"seed", c.run.seed},
                {"threads", c.run.threads},
                {"formats", c.run.formats},
                {"budget", c.run.budget},
                {"strict", c.run.strict}};
    if (s.family == GeographyFamily::Torus)
        j["geography"] = {{"family", "torus"}, {"dimension", s.dimension}, {"n", c.n}};
    else
        j["geography"] = {{"family", "hierarchical"}, {"order", s.order}, {"n", c.n}};
    j["ladder"] = s.ladder;

    json k;
    if (auto nn = std::get_if<NearestNeighbour>(&s.kernel)) k = {{"type", "nearest_neighbour"}, {"rate", nn->rate}};
    else if (auto ht = std::get_if<HeavyTail>(&s.kernel)) k = {{"type", "heavy_tail"}, {"Q", ht->Q}, {"q", ht->q}};
    else k = {{"type", "hierarchical"}, {"c", std::get<HierarchicalRates>(s.kernel).c}};
    k["symmetrize"] = s.kernel_options.symmetrize;
    k["fold"] = s.kernel_options.fold;
    k["fold_epsilon"] = s.kernel_options.fold_epsilon;
    k["shell_cap"] = s.kernel_options.shell_cap;
    j["kernel"] = k;

    if (auto p = std::get_if<PolynomialBank>(&s.bank))
        j["seedbank"] = {{"type", "polynomial"}, {"A", p->A}, {"alpha", p->alpha}, {"B", p->B}, {"beta", p->beta}, {"M", emit_mrule(s.M)}};
    else if (auto h = std::get_if<HierarchicalBank>(&s.bank))
        j["seedbank"] = {{"type", "hierarchical"}, {"K", h->K}, {"e", h->e}, {"N", h->N}, {"M", emit_mrule(s.M)}};
    else
        j["seedbank"] = {{"type", "explicit"}, {"K", s.K}, {"e", s.e}};
    j["model"] = model_name(s.model);
    switch (s.g_kind) {
    case DiffusionKind::FisherWright: j["diffusion"] = {{"type", "fisher_wright"}, {"d", s.g_rate}}; break;
    case DiffusionKind::OhtaKimura: j["diffusion"] = {{"type", "ohta_kimura"}, {"d", s.g_rate}}; break;
    default: j["diffusion"] = {{"type", "custom"}, {"grid", s.g_grid}};
    }
    j["initial"] = {{"theta", s.theta}, {"law", s.initial == InitialLaw::Constant ? "constant" : "bernoulli"}};
    j["integrator"] = {{"dt", s.dt}, {"boundary", boundary_scheme_name(s.boundary)}};
    j["forward"] = {{"replicas", c.forward.replicas}, {"horizon", c.forward.horizon}, {"observe_every", c.forward.observe_every}};

    json lineages = json::array();
    for (const DualState& u : c.dual.lineages) lineages.push_back({{"site", u.site}, {"colour", u.state.colour}});
    j["dual"] = {{"lineages", lineages},
                 {"d", c.dual.d},
                 {"horizon", c.dual.horizon},
                 {"replicas", c.dual.replicas},
                 {"record_motion", c.dual.record_motion},
                 {"hazard", {{"enabled", c.dual.hazard}, {"T", c.dual.hazard_T}, {"replicas", c.dual.hazard_replicas}}}};

    json examples = json::array();
    for (const auto& ex : c.criteria.examples) {
        if (auto e = std::get_if<EuclideanExample>(&ex)) examples.push_back({{"type", "euclidean"}, {"d", e->d}, {"gamma", e->gamma}});
        else if (auto h = std::get_if<HeavyTailExample>(&ex)) examples.push_back({{"type", "heavy_tail"}, {"q", h->q}, {"gamma", h->gamma}});
        else {
            const auto& x = std::get<HierarchicalExample>(ex);
            examples.push_back({{"type", "hierarchical"}, {"N", x.N}, {"c", x.c}, {"K", x.K}, {"e", x.e}});
        }
    }
    json integrals = json::array();
    for (const IntegralSpec& in : c.criteria.integrals) {
        json a = in.a.tabulated ? json{{"type", "table"}, {"t", in.a.t}, {"values", in.a.values}}
                                : json{{"type", "power_law"}, {"c", in.a.c}, {"a", in.a.a}};
        integrals.push_back({{"return_probability", a},
                             {"mode", in.mode == IntegralSpec::Mode::FiniteRho ? "finite_rho" : "infinite_rho"},
                             {"gamma", in.gamma},
                             {"horizon", in.horizon}});
    }
    j["criteria"] = {{"examples", examples}, {"integrals", integrals}};

    const FssSection& f = c.fss;
    j["fss"] = {
        {"replicas", s.replicas},
        {"s_grid", s.s_grid},
        {"unit", time_unit_name(s.unit)},
        {"observables", f.observables},
        {"tasks", f.tasks},
        {"fg",
         {{"theta_grid", f.fg.theta_grid},
          {"replicas", f.fg.replicas},
          {"burn_in_factor", f.fg.burn_in_factor},
          {"window_factor", f.fg.window_factor},
          {"sample_interval", f.fg.sample_interval},
          {"relaxation", f.fg.relaxation ? json(*f.fg.relaxation) : json(nullptr)},
          {"bhat",
           {{"source", f.bhat_source}, {"value", f.bhat_value}, {"hazard_T", f.hazard_T}, {"hazard_replicas", f.hazard_replicas}}}}},
        {"reference",
         {{"source", f.reference_source},
          {"d_star", f.reference_d_star ? json(*f.reference_d_star) : json(nullptr)}, {"replicas", f.reference_replicas}, {"ds", f.reference_ds}}},
        {"trapping",
         {{"replicas", f.trapping.replicas},
          {"horizon", f.trapping.horizon},
          {"epsilon", f.trapping.epsilon},
          {"check_interval", f.trapping.check_interval}}},
        {"clustering",
         {{"probe_times", f.clustering.probe_times}, {"replicas", f.clustering.replicas}, {"tolerance", f.clustering.tolerance}}}};

    const RenewalOptions& ro = c.renewal.options;
    j["renewal"] = {{"gammas", c.renewal.gammas},
                    {"horizon", ro.horizon},
                    {"increments", ro.increments},
                    {"fit_lo", ro.fit_lo},
                    {"min_tail_count", ro.min_tail_count},
                    {"laplace_samples", ro.laplace_samples},
                    {"laplace_sites", ro.laplace_sites},
                    {"lambdas", ro.lambdas}};
    return j;
}

std::string canonical_config(const Config& c) {
    json j = emit_config(c);
    j["run"].erase("threads");
    return j.dump();
}

} // namespace seedbank
