#include "seedbank/forward_sde.hpp"
#include "seedbank/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace seedbank {

std::string model_name(Model m) {
    switch (m) {
    case Model::M1: return "M1";
    case Model::M2: return "M2";
    default: return "M3";
    }
}

// ---------------------------------------------------------------------------------
// Diffusion functions

DiffusionFunction DiffusionFunction::fisher_wright(double d) {
    if (!(d > 0.0)) throw std::invalid_argument("Fisher-Wright rate d must be > 0");
    DiffusionFunction g;
    g.kind_ = DiffusionKind::FisherWright;
    g.d_ = d;
    g.lipschitz_ = d;
    return g;
}

DiffusionFunction DiffusionFunction::zero() {
    DiffusionFunction g;
    g.kind_ = DiffusionKind::FisherWright;
    g.d_ = 0.0;
    return g;
}

DiffusionFunction DiffusionFunction::ohta_kimura(double d) {
    if (!(d > 0.0)) throw std::invalid_argument("Ohta-Kimura rate d must be > 0");
    DiffusionFunction g;
    g.kind_ = DiffusionKind::OhtaKimura;
    g.d_ = d;
    // |g'| = 2d |x(1-x)(1-2x)|, maximal where 1-2x = 1/sqrt(3)
    g.lipschitz_ = d / (3.0 * std::sqrt(3.0));
    return g;
}

DiffusionFunction DiffusionFunction::custom(std::vector<double> v) {
    if (v.size() < 3) throw std::invalid_argument("custom g needs at least 3 grid values");
    if (std::abs(v.front()) > 1e-12 || std::abs(v.back()) > 1e-12)
        throw std::invalid_argument("custom g must vanish at 0 and 1 (within 1e-12)");
    for (std::size_t k = 1; k + 1 < v.size(); ++k)
        if (!(v[k] > 0.0) || !std::isfinite(v[k])) throw std::invalid_argument("custom g must be positive on the interior grid");
    v.front() = 0.0;
    v.back() = 0.0;
    DiffusionFunction g;
    g.kind_ = DiffusionKind::Custom;
    g.d_ = 0.0;
    const double h = 1.0 / static_cast<double>(v.size() - 1);
    for (std::size_t k = 0; k + 1 < v.size(); ++k) g.lipschitz_ = std::max(g.lipschitz_, std::abs(v[k + 1] - v[k]) / h);
    g.grid_ = std::move(v);
    return g;
}

double DiffusionFunction::interpolate(double x) const {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double pos = x * static_cast<double>(grid_.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
    const double w = pos - static_cast<double>(k);
    return grid_[k] * (1.0 - w) + grid_[k + 1] * w;
}

std::string DiffusionFunction::name() const {
    switch (kind_) {
    case DiffusionKind::FisherWright: return "fisher_wright";
    case DiffusionKind::OhtaKimura: return "ohta_kimura";
    default: return "custom";
    }
}

// ---------------------------------------------------------------------------------
// States and parameters

void validate(const SystemParams& p) {
    const int C = p.profile.colours();
    if (p.model == Model::M1 && C != 1) throw std::invalid_argument("Model 1 has exactly one dormant colour (M = 0)");
    if (p.model == Model::M3) {
        if (static_cast<int>(p.displacement.size()) != C)
            throw std::invalid_argument("Model 3 needs one displacement kernel per colour");
        for (const auto& k : p.displacement)
            if (!(k.geography() == p.kernel.geography()))
                throw std::invalid_argument("displacement kernel lives on a different geography");
    } else if (!p.displacement.empty()) {
        throw std::invalid_argument("displacement kernels are only meaningful for Model 3");
    }
}

SystemState SystemState::constant(Model model, std::size_t sites, int colours, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("initial density must lie in [0,1]");
    SystemState s;
    s.model = model;
    s.sites = sites;
    s.colours = colours;
    s.x.assign(sites, theta);
    s.y.assign(sites * static_cast<std::size_t>(colours), theta);
    return s;
}

SystemState SystemState::bernoulli(Model model, std::size_t sites, int colours, double theta, Rng& rng) {
    SystemState s = constant(model, sites, colours, theta);
    std::bernoulli_distribution b(theta);
    for (auto& v : s.x) v = b(rng) ? 1.0 : 0.0;
    for (auto& v : s.y) v = b(rng) ? 1.0 : 0.0;
    return s;
}

SystemState SystemState::for_params(const SystemParams& p, double theta) {
    return constant(p.model, p.kernel.geography().size(), p.profile.colours(), theta);
}

// ---------------------------------------------------------------------------------
// Integrator

EulerMaruyama::EulerMaruyama(SystemParams params) : params_(std::move(params)) {
    validate(params_);
    const Geography& geo = params_.kernel.geography();
    sites_ = geo.size();
    colours_ = params_.profile.colours();
    for (int m = 0; m < colours_; ++m) {
        const auto mm = static_cast<std::size_t>(m);
        Ke_.push_back(params_.profile.K()[mm] * params_.profile.e()[mm]);
        e_.push_back(params_.profile.e()[mm]);
    }
    const auto& support = params_.kernel.support();
    nbr_width_ = support.size();
    for (const auto& e : support) nbr_rate_.push_back(e.rate);
    nbr_table_ = sites_ * nbr_width_ <= (std::size_t{1} << 24);
    if (nbr_table_) {
        nbr_.resize(sites_ * nbr_width_);
        for (Site i = 0; i < sites_; ++i)
            for (std::size_t s = 0; s < nbr_width_; ++s) nbr_[i * nbr_width_ + s] = geo.add(i, support[s].offset);
    }
    if (params_.model == Model::M3) {
        for (const auto& k : params_.displacement) {
            std::vector<KernelEntry> full;
            for (Site j = 0; j < k.row().size(); ++j)
                if (k.row()[j] > 0.0) full.push_back({j, k.row()[j]});
            disp_.push_back(std::move(full));
            disp_mass_.push_back(k.total_mass());
        }
    }
    x_next_.resize(sites_);
    y_next_.resize(sites_ * static_cast<std::size_t>(colours_));
}

const char* boundary_scheme_name(BoundaryScheme s) {
    return s == BoundaryScheme::Clamp ? "clamp" : "moment_matching";
}

double bounded_update(double m, double v, double z, BoundaryScheme scheme) {
    if (scheme == BoundaryScheme::Clamp) return std::clamp(m + std::sqrt(std::max(v, 0.0)) * z, 0.0, 1.0);
    m = std::clamp(m, 0.0, 1.0);
    v = std::min(v, m * (1.0 - m)); // no law on [0,1] with mean m has a larger variance
    if (!(v > 0.0)) return m;
    const double sd = std::sqrt(v);
    const double room = std::min(m, 1.0 - m);
    if (5.0 * sd <= room) return std::clamp(m + sd * z, 0.0, 1.0);
    if (sd <= room) return z < 0.0 ? m - sd : m + sd;
    const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
    if (m <= 0.5) {
        const double p = m * m / (m * m + v);
        return u < p ? std::min(1.0, m + v / m) : 0.0;
    }
    const double q = 1.0 - m;
    const double p = q * q / (q * q + v);
    return u < p ? std::max(0.0, m - v / q) : 1.0;
}

double EulerMaruyama::default_dt() const {
    double emax = 0.0, chi = 0.0;
    for (int m = 0; m < colours_; ++m) {
        emax = std::max(emax, e_[static_cast<std::size_t>(m)]);
        chi += Ke_[static_cast<std::size_t>(m)];
    }
    const double rate = params_.kernel.total_rate() + chi + emax;
    return std::min(0.01, 0.1 / rate);
}

void EulerMaruyama::check_state(const SystemState& s) const {
    if (s.sites != sites_ || s.colours != colours_ || s.x.size() != sites_ ||
        s.y.size() != sites_ * static_cast<std::size_t>(colours_))
        throw std::invalid_argument("state dimensions do not match the geography/profile");
}

void EulerMaruyama::compute_drift(const SystemState& s, std::vector<double>& dx, std::vector<double>& dy) const {
    check_state(s);
    const Geography& geo = params_.kernel.geography();
    const auto& support = params_.kernel.support();
    const auto C = static_cast<std::size_t>(colours_);
    dx.assign(sites_, 0.0);
    dy.assign(sites_ * C, 0.0);
    for (Site i = 0; i < sites_; ++i) {
        double mig = 0.0;
        for (std::size_t k = 0; k < nbr_width_; ++k) {
            const Site j = nbr_table_ ? nbr_[i * nbr_width_ + k] : geo.add(i, support[k].offset);
            mig += nbr_rate_[k] * (s.x[j] - s.x[i]);
        }
        dx[i] = mig;
    }
    if (params_.model != Model::M3) {
        for (std::size_t i = 0; i < sites_; ++i) {
            for (std::size_t m = 0; m < C; ++m) {
                const double diff = s.y[i * C + m] - s.x[i];
                dx[i] += Ke_[m] * diff;
                dy[i * C + m] = -e_[m] * diff;
            }
        }
        return;
    }
    // Model 3: dx_i += sum_m K_m e_m (sum_k a_m(0,k) y_{i-k,m} - |a_m| x_i)
    //          dy_{i,m} = e_m (sum_k a_m(0,k) x_{i+k} - |a_m| y_{i,m})
    for (Site i = 0; i < sites_; ++i) {
        for (std::size_t m = 0; m < C; ++m) {
            double in_y = 0.0, in_x = 0.0;
            for (const auto& e : disp_[m]) {
                in_y += e.rate * s.y[geo.sub(i, e.offset) * C + m];
                in_x += e.rate * s.x[geo.add(i, e.offset)];
            }
            dx[i] += Ke_[m] * (in_y - disp_mass_[m] * s.x[i]);
            dy[i * C + m] = e_[m] * (in_x - disp_mass_[m] * s.y[i * C + m]);
        }
    }
}

void EulerMaruyama::step(SystemState& s, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be > 0");
    check_state(s);
    const auto C = static_cast<std::size_t>(colours_);
    const DiffusionFunction& g = params_.g;
    if (params_.model == Model::M3) {
        std::vector<double> dx, dy;
        compute_drift(s, dx, dy);
        for (std::size_t i = 0; i < sites_; ++i) {
            const double gx = g(s.x[i]);
            s.x[i] = bounded_update(s.x[i] + dx[i] * dt, gx * dt, normal_(rng), params_.boundary);
        }
        for (std::size_t k = 0; k < s.y.size(); ++k) s.y[k] = std::clamp(s.y[k] + dy[k] * dt, 0.0, 1.0);
        s.time += dt;
        return;
    }
    const Geography& geo = params_.kernel.geography();
    const auto& support = params_.kernel.support();
    const double* x = s.x.data();
    for (Site i = 0; i < sites_; ++i) {
        const double xi = x[i];
        double mig = 0.0;
        if (nbr_table_) {
            const Site* nb = nbr_.data() + i * nbr_width_;
            for (std::size_t k = 0; k < nbr_width_; ++k) mig += nbr_rate_[k] * (x[nb[k]] - xi);
        } else {
            for (std::size_t k = 0; k < nbr_width_; ++k) mig += nbr_rate_[k] * (x[geo.add(i, support[k].offset)] - xi);
        }
        double ex = 0.0;
        double* yi = s.y.data() + i * C;
        for (std::size_t m = 0; m < C; ++m) {
            const double diff = yi[m] - xi;
            ex += Ke_[m] * diff;
            yi[m] = std::clamp(yi[m] - e_[m] * diff * dt, 0.0, 1.0);
        }
        const double gx = g(xi);
        x_next_[i] = gx > 0.0 ? bounded_update(xi + (mig + ex) * dt, gx * dt, normal_(rng), params_.boundary)
                               : std::clamp(xi + (mig + ex) * dt, 0.0, 1.0);
    }
    std::swap(s.x, x_next_);
    s.time += dt;
}

DriftRates drift(const SystemState& state, const SystemParams& params) {
    EulerMaruyama em(params);
    DriftRates r;
    em.compute_drift(state, r.dx, r.dy);
    return r;
}

void step(SystemState& state, const SystemParams& params, double dt, Rng& rng) {
    EulerMaruyama em(params);
    em.step(state, dt, rng);
}

// ---------------------------------------------------------------------------------
// Observables

Macroscopic macroscopic(const SystemState& s, const SeedBankProfile& profile) {
    if (s.colours != profile.colours()) throw std::invalid_argument("state and profile disagree on the colour count");
    const auto C = static_cast<std::size_t>(s.colours);
    CompensatedSum total, active, rho;
    for (double k : profile.K()) rho.add(k);
    for (std::size_t i = 0; i < s.sites; ++i) {
        double site = s.x[i];
        for (std::size_t m = 0; m < C; ++m) site += profile.K()[m] * s.y[i * C + m];
        total.add(site);
        active.add(s.x[i]);
    }
    const double G = static_cast<double>(s.sites);
    return {total.value() / (G * (1.0 + rho.value())), active.value() / G};
}

IncreasingProcessIncrement increasing_process_increment(const SystemState& s, const DiffusionFunction& g,
                                                         const SeedBankProfile& profile, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    CompensatedSum sum;
    for (double x : s.x) sum.add(g(std::clamp(x, 0.0, 1.0)));
    const double G = static_cast<double>(s.sites);
    const double kappa = summarize(profile).kappa;
    return {dt * sum.value() / (G * G * kappa), dt * sum.value() / G};
}

DepthMoments diversity_and_depth_moments(const SystemState& s, int depth) {
    if (depth < -1 || depth >= s.colours) throw std::invalid_argument("depth must satisfy L <= M");
    const auto layers = static_cast<std::size_t>(depth + 2);
    const auto C = static_cast<std::size_t>(s.colours);
    const double G = static_cast<double>(s.sites);
    DepthMoments out;
    out.means.assign(layers, 0.0);
    out.variances.assign(layers, 0.0);
    out.covariance.assign(layers, std::vector<double>(layers, 0.0));
    auto value = [&](std::size_t i, std::size_t l) { return l == 0 ? s.x[i] : s.y[i * C + (l - 1)]; };
    for (std::size_t i = 0; i < s.sites; ++i) {
        out.diversity += s.x[i] * (1.0 - s.x[i]);
        for (std::size_t l = 0; l < layers; ++l) out.means[l] += value(i, l);
    }
    out.diversity /= G;
    for (auto& m : out.means) m /= G;
    for (std::size_t i = 0; i < s.sites; ++i)
        for (std::size_t a = 0; a < layers; ++a)
            for (std::size_t b = a; b < layers; ++b)
                out.covariance[a][b] += (value(i, a) - out.means[a]) * (value(i, b) - out.means[b]);
    for (std::size_t a = 0; a < layers; ++a) {
        for (std::size_t b = a; b < layers; ++b) {
            out.covariance[a][b] /= G;
            out.covariance[b][a] = out.covariance[a][b];
        }
        out.variances[a] = out.covariance[a][a];
    }
    return out;
}

// ---------------------------------------------------------------------------------
// Runs

namespace {
Observation observe(const SystemState& s, const SystemParams& p, double qvar) {
    const auto mac = macroscopic(s, p.profile);
    double div = 0.0;
    for (double x : s.x) div += x * (1.0 - x);
    return {s.time, mac.theta_hat, mac.theta_x, div / static_cast<double>(s.sites), qvar};
}
} // namespace

Trajectory run(SystemState state, EulerMaruyama& em, const RunOptions& opt, Rng& rng) {
    if (!(opt.horizon > 0.0)) throw std::invalid_argument("run horizon must be > 0");
    for (std::size_t k = 0; k < opt.observe.size(); ++k) {
        if (opt.observe[k] < 0.0 || opt.observe[k] > opt.horizon)
            throw std::invalid_argument("observer times must lie in [0, horizon]");
        if (k > 0 && !(opt.observe[k] > opt.observe[k - 1]))
            throw std::invalid_argument("observer times must be strictly increasing");
    }
    em.reset_noise();
    const SystemParams& p = em.params();
    Trajectory traj;
    traj.dt = opt.dt > 0.0 ? opt.dt : em.default_dt();
    const double G = static_cast<double>(state.sites);
    const double kappa = summarize(p.profile).kappa;
    double qvar = 0.0;
    const double t0 = state.time;

    std::vector<double> targets = opt.observe;
    targets.push_back(opt.horizon);
    std::size_t next_obs = 0;
    double now = 0.0;
    for (double target : targets) {
        const double span = target - now;
        if (span > 0.0) {
            const auto n = static_cast<std::size_t>(std::ceil(span / traj.dt - 1e-9));
            const double h = span / static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                double gs = 0.0;
                for (double x : state.x) gs += p.g(x);
                qvar += h * gs / (G * G * kappa);
                em.step(state, h, rng);
            }
            now = target;
            state.time = t0 + now;
        }
        if (next_obs < opt.observe.size() && opt.observe[next_obs] == target) {
            traj.records.push_back(observe(state, p, qvar));
            if (opt.snapshots) traj.snapshots.push_back(state);
            ++next_obs;
        }
    }
    traj.final_state = std::move(state);
    return traj;
}

Trajectory run(SystemState state, const SystemParams& params, const RunOptions& opt, Rng& rng) {
    EulerMaruyama em(params);
    return run(std::move(state), em, opt, rng);
}

} // namespace seedbank
