#pragma once

#include "seedbank/geometry.hpp"
#include "seedbank/random.hpp"
#include "seedbank/seedbank.hpp"

#include <random>
#include <string>
#include <vector>

namespace seedbank {

enum class Model { M1, M2, M3 };
std::string model_name(Model m);

enum class DiffusionKind { FisherWright, OhtaKimura, Custom };

// g in the class G: zero at both ends, positive inside, Lipschitz.
class DiffusionFunction {
public:
    static DiffusionFunction fisher_wright(double d);
    static DiffusionFunction ohta_kimura(double d);
    // g = 0: the noise-free limit. Not in G; used to check the drift integration.
    static DiffusionFunction zero();
    // Values on the uniform grid k/(n-1), linearly interpolated. Validated on construction.
    static DiffusionFunction custom(std::vector<double> grid_values);

    double operator()(double x) const {
        switch (kind_) {
        case DiffusionKind::FisherWright: return d_ * x * (1.0 - x);
        case DiffusionKind::OhtaKimura: {
            const double v = x * (1.0 - x);
            return d_ * v * v;
        }
        default: return interpolate(x);
        }
    }

    DiffusionKind kind() const { return kind_; }
    double rate() const { return d_; }
    const std::vector<double>& grid() const { return grid_; }
    double lipschitz() const { return lipschitz_; }
    std::string name() const;

private:
    double interpolate(double x) const;
    DiffusionKind kind_ = DiffusionKind::FisherWright;
    double d_ = 1.0;
    std::vector<double> grid_;
    double lipschitz_ = 0.0;
};

// How a noisy update is kept inside [0,1].
//  Clamp: Gaussian step, then clamp. Leaks mass away from the nearer trap at a rate
//         of order sqrt(dt), which biases the macroscopic martingale.
//  MomentMatching: Gaussian step when five standard deviations fit inside [0,1];
//         otherwise a two-point step with the same mean and variance (symmetric if it
//         fits, else one atom on the nearer trap). Traps stay absorbing and the mean is exact.
enum class BoundaryScheme { MomentMatching, Clamp };
const char* boundary_scheme_name(BoundaryScheme s);

// One noisy update from the drift-advanced value m with increment variance v, driven
// by a single standard normal z (the two-point branches use Phi(z) as their uniform).
double bounded_update(double m, double v, double z, BoundaryScheme scheme);

struct SystemParams {
    Model model = Model::M1;
    MigrationKernel kernel;
    SeedBankProfile profile;
    DiffusionFunction g;
    // Model 3 only: one translation-invariant displacement kernel per colour, read
    // including the diagonal entry (a_m(i,i) is the chance of not being displaced).
    std::vector<MigrationKernel> displacement;
    BoundaryScheme boundary = BoundaryScheme::MomentMatching;
};

void validate(const SystemParams& p);

// x_i per site, y_{i,m} stored site-major (y[i * colours + m]).
struct SystemState {
    Model model = Model::M1;
    std::size_t sites = 0;
    int colours = 1;
    std::vector<double> x;
    std::vector<double> y;
    double time = 0.0;

    double& dormant(std::size_t i, int m) { return y[i * static_cast<std::size_t>(colours) + static_cast<std::size_t>(m)]; }
    double dormant(std::size_t i, int m) const { return y[i * static_cast<std::size_t>(colours) + static_cast<std::size_t>(m)]; }

    static SystemState constant(Model model, std::size_t sites, int colours, double theta);
    // Every component independently 1 with probability theta, else 0.
    static SystemState bernoulli(Model model, std::size_t sites, int colours, double theta, Rng& rng);
    static SystemState for_params(const SystemParams& p, double theta);

    bool operator==(const SystemState&) const = default;
};

struct DriftRates {
    std::vector<double> dx;
    std::vector<double> dy;
};

// Exact right-hand sides of the Model 1-3 equations without noise.
DriftRates drift(const SystemState& state, const SystemParams& params);

// Euler-Maruyama integrator. Owns precomputed neighbour tables and scratch buffers,
// so each worker should hold its own instance.
class EulerMaruyama {
public:
    explicit EulerMaruyama(SystemParams params);
    const SystemParams& params() const { return params_; }

    void compute_drift(const SystemState& s, std::vector<double>& dx, std::vector<double>& dy) const;
    // x <- bounded_update(x + drift dt, g(x) dt, N(0,1)) per site, y += drift dt clamped to [0,1].
    void step(SystemState& s, double dt, Rng& rng);
    void reset_noise() { normal_.reset(); }

    // min(0.01, 0.1 / (migration rate + chi + max_m e_m)).
    double default_dt() const;

private:
    void check_state(const SystemState& s) const;
    SystemParams params_;
    std::size_t sites_;
    int colours_;
    std::vector<double> Ke_;
    std::vector<double> e_;
    // migration: neighbour labels i + k for every off-diagonal support entry k
    std::vector<Site> nbr_;
    std::vector<double> nbr_rate_;
    std::size_t nbr_width_ = 0;
    bool nbr_table_ = false;
    // Model 3: full displacement rows (diagonal included)
    std::vector<std::vector<KernelEntry>> disp_;
    std::vector<double> disp_mass_;
    std::vector<double> x_next_, y_next_;
    std::normal_distribution<double> normal_;
};

void step(SystemState& state, const SystemParams& params, double dt, Rng& rng);

struct Macroscopic {
    double theta_hat = 0.0; // seed-bank weighted density
    double theta_x = 0.0;   // active density
};
Macroscopic macroscopic(const SystemState& state, const SeedBankProfile& profile);

struct IncreasingProcessIncrement {
    double unscaled = 0.0; // dt |G|^{-2} kappa_M^{-1} sum_i g(x_i)
    double rescaled = 0.0; // dt |G|^{-1} sum_i g(x_i), the form on the clock s beta_n
};
IncreasingProcessIncrement increasing_process_increment(const SystemState& state, const DiffusionFunction& g,
                                                         const SeedBankProfile& profile, double dt);

// Layer 0 is the active layer, layer m+1 is dormant colour m.
struct DepthMoments {
    double diversity = 0.0; // site average of x(1-x)
    std::vector<double> means;
    std::vector<double> variances;              // spatial (population) variances
    std::vector<std::vector<double>> covariance; // spatial covariance between layers
};
DepthMoments diversity_and_depth_moments(const SystemState& state, int depth);

struct Observation {
    double time = 0.0;
    double theta_hat = 0.0;
    double theta_x = 0.0;
    double diversity = 0.0;
    double qvar = 0.0; // accumulated unscaled increasing process
};

struct RunOptions {
    double horizon = 1.0;
    double dt = 0.0; // 0: integrator default
    std::vector<double> observe; // sorted times in [0, horizon]
    bool snapshots = false;
};

struct Trajectory {
    std::vector<Observation> records;
    std::vector<SystemState> snapshots;
    SystemState final_state;
    double dt = 0.0;
};

Trajectory run(SystemState state, EulerMaruyama& integrator, const RunOptions& options, Rng& rng);
Trajectory run(SystemState state, const SystemParams& params, const RunOptions& options, Rng& rng);

} // namespace seedbank
