#pragma once

#include "seedbank/forward_sde.hpp"
#include "seedbank/geometry.hpp"
#include "seedbank/seedbank.hpp"
#include "seedbank/stats.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace seedbank {

// ---------------------------------------------------------------------------
// Time scales and growth regimes

enum class GrowthRegime { I, II, Critical, NotApplicable };
std::string regime_name(GrowthRegime r);

// a << b iff a/b < kRegimeBand; the band [kRegimeBand, 1/kRegimeBand] is Critical.
inline constexpr double kRegimeBand = 0.1;

struct TimeScaleReport {
    std::size_t sites = 0;
    int M = 0;
    double kappa = 1.0;  // (1 + rho_M)^2 for the truncated profile
    double beta_n = 0.0; // kappa |G_n|
    std::optional<double> gamma;
    std::optional<double> beta_star;  // M^beta
    std::optional<double> beta_2star; // |G|^{1/(2 gamma - 1)}, e^{|G|} or infinity
    GrowthRegime regime = GrowthRegime::NotApplicable;
};

TimeScaleReport time_scales(const Geography& geo, const SeedBankProfile& profile, Model model);

// ---------------------------------------------------------------------------
// Experiment specification

struct MRule {
    enum class Kind { Constant, Power };
    Kind kind = Kind::Constant;
    double value = 0.0;    // M itself (Constant) or the prefactor c in M_n = round(c n^p)
    double exponent = 1.0; // p (Power only)
    int operator()(int n) const;
};

enum class TimeUnit { BetaN, BetaStar, Absolute };
std::string time_unit_name(TimeUnit u);

enum class InitialLaw { Constant, Bernoulli };

struct ExperimentSpec {
    GeographyFamily family = GeographyFamily::Torus;
    int dimension = 1; // torus only
    int order = 2;     // hierarchical only
    std::vector<int> ladder{4};
    KernelSpec kernel = NearestNeighbour{};
    KernelOptions kernel_options;
    BankProvenance bank = ExplicitBank{};
    std::vector<double> K{1.0}, e{1.0}; // explicit profile coefficients
    MRule M;                             // Polynomial / Hierarchical truncation
    Model model = Model::M1;
    DiffusionKind g_kind = DiffusionKind::FisherWright;
    double g_rate = 1.0;
    std::vector<double> g_grid; // Custom only
    double theta = 0.5;
    InitialLaw initial = InitialLaw::Constant;
    std::size_t replicas = 100;
    std::vector<double> s_grid{0.0, 0.5, 1.0, 2.0};
    TimeUnit unit = TimeUnit::BetaN;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double dt = 0.0;      // 0: integrator default
    BoundaryScheme boundary = BoundaryScheme::MomentMatching;
    double budget = 1e12; // cap on projected site-steps per ladder entry
};

void validate(const ExperimentSpec& spec);

Geography ladder_geography(const ExperimentSpec& spec, int n);
SeedBankProfile ladder_profile(const ExperimentSpec& spec, int n);
DiffusionFunction make_diffusion(const ExperimentSpec& spec);
SystemParams ladder_params(const ExperimentSpec& spec, int n);
SystemState initial_state(const ExperimentSpec& spec, const SystemParams& params, double theta, Rng& rng);

// Macroscopic time unit of a ladder entry: beta_n, beta*_n or 1.
double time_unit_scale(const ExperimentSpec& spec, const TimeScaleReport& scales);

// Projected work of one ladder entry in site-steps (replicas x steps x components x
// neighbourhood width).
double projected_cost(const ExperimentSpec& spec, int n, double horizon, std::size_t replicas);

// ---------------------------------------------------------------------------
// Finite-systems scheme

struct LadderRun {
    int n = 0;
    TimeScaleReport scales;
    double cost = 0.0;
    std::vector<double> times; // absolute observation times
    std::vector<std::vector<double>> theta_hat; // [replica][grid point]
    std::vector<std::vector<double>> theta_x;
    std::vector<DepthMoments> final_moments; // per replica, full depth
};

struct FssResult {
    std::vector<LadderRun> entries;
};

// Throws BudgetRefusal when some entry's projected cost exceeds spec.budget; nothing
// is simulated in that case.
FssResult finite_systems_run(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// F g estimation

struct FgOptions {
    std::vector<double> theta_grid{0.2, 0.35, 0.5, 0.65, 0.8};
    std::size_t replicas = 20;
    double burn_in_factor = 10.0;   // burn-in in relaxation times
    double window_factor = 4.0;     // averaging window in relaxation times
    double sample_interval = 0.5;   // absolute time between samples in the window
    std::optional<double> relaxation; // override of the relaxation-time estimate
    std::optional<double> bhat;       // enables the variance route
};

struct FgPoint {
    double theta = 0.0;
    double fg = 0.0; // conditioned on theta_hat = theta (see estimate_Fg)
    double se = 0.0;
    double raw = 0.0; // plain window average of |G|^{-1} sum g(x_i)
    double raw_se = 0.0;
    double fg_variance = 0.0; // variance route; NaN without bhat
    double fg_variance_se = 0.0;
    double halves_difference = 0.0;
    double halves_se = 0.0;
    bool non_equilibrated = false;
};

struct FgTable {
    int n = 0;
    double relaxation = 0.0;
    double burn_in = 0.0;
    double window = 0.0;
    std::vector<FgPoint> points; // sorted by theta

    // Linear interpolation through the points with zeros forced at 0 and 1.
    double operator()(double theta) const;
};

// max(1/min_m e_m, 1/spectral gap)
double relaxation_time(const MigrationKernel& kernel, const SeedBankProfile& profile);

// Quasi-equilibrium average of |G|^{-1} sum g(x_i) on the largest ladder entry. Samples
// after the burn-in are pooled over the window and the replicas; because theta_hat itself
// diffuses, the estimate is the intercept at theta_hat = theta of a quadratic regression
// of the sampled averages on theta_hat - theta. Standard errors are replica jackknives.
FgTable estimate_Fg(const ExperimentSpec& spec, const FgOptions& options);

// ---------------------------------------------------------------------------
// Reference diffusion d Theta = sqrt(F(Theta)) dW

inline constexpr double kTrapEpsilon = 1e-4;

struct ReferenceOptions {
    std::size_t replicas = 1000;
    double ds = 1e-3;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double epsilon = kTrapEpsilon;
    double hitting_horizon = 0.0; // simulate at least this long for hitting times
    BoundaryScheme boundary = BoundaryScheme::MomentMatching;
};

struct ReferenceEnsemble {
    std::vector<double> s_grid;
    std::vector<std::vector<double>> paths; // [replica][grid point]
    std::vector<double> hitting;            // first s within epsilon of 0 or 1
    std::vector<char> censored;
    std::vector<int> trap; // 0, 1, or -1 when not trapped
};

ReferenceEnsemble fg_diffusion_reference(const std::function<double(double)>& F, double theta0,
                                         std::vector<double> s_grid, const ReferenceOptions& options);

// ---------------------------------------------------------------------------
// Trapping times

struct AccessibilityReport {
    bool accessible = true;
    double value = 0.0;                 // integral of x(1-x)/g on [delta, 1-delta], smallest delta
    std::vector<double> profile;        // the same for delta = 1e-2 .. 1e-12
};

AccessibilityReport accessibility(const DiffusionFunction& g);

struct TrappingOptions {
    std::size_t replicas = 100;
    double horizon = 20.0; // in units of beta_n
    double epsilon = kTrapEpsilon;
    double check_interval = 0.1; // absolute time between trap checks
};

struct TrappingEntry {
    int n = 0;
    double beta_n = 0.0;
    std::vector<double> h_over_beta; // censored replicas carry the horizon
    std::vector<char> censored;
    std::vector<int> trap;
    double censored_fraction = 0.0;
    double median = 0.0; // infinity when more than half are censored
};

struct TrappingResult {
    AccessibilityReport access;
    std::vector<TrappingEntry> entries;
};

// Values within epsilon of 0 or 1 are moved onto the trap before distributions are
// compared: the limit laws carry atoms there, while a fixed finite system only
// approaches the trap exponentially (its dormant layers decay at rate e_m).
std::vector<double> snap_to_traps(std::vector<double> values, double epsilon = kTrapEpsilon);

bool at_common_trap(const SystemState& s, double epsilon, int* which = nullptr);
TrappingResult trapping_time(const ExperimentSpec& spec, const TrappingOptions& options);

// ---------------------------------------------------------------------------
// Regime-II clustering diagnostics

enum class ClusterPattern { Equilibrium, PartialClustering, CompleteClustering, Unclassified };
std::string pattern_name(ClusterPattern p);

// Mean of z_{u1}(1 - z_{u2}) over ordered pairs u1 != u2 of components in layers
// [first, last] (layer 0 active, layer m+1 colour m) at all sites.
double pair_diagnostic(const SystemState& s, int first_layer, int last_layer);
// floor(t^{1/beta} / 10), clamped to [0, M]
int clustering_depth(double t, double beta, int M);

struct ClusteringOptions {
    std::vector<double> probe_times; // absolute
    std::size_t replicas = 100;
    double tolerance = 0.05; // fraction of theta(1-theta)
};

struct ClusteringProbe {
    double t = 0.0;
    int L = 0;
    MeanSE shallow;   // layers 0..L+1
    MeanSE deep;      // layers L+2..M+1 (NaN when empty)
    MeanSE full;      // all layers
    MeanSE deep_mean; // replica average of the deep-layer density
    double upsilon_frequency = 0.0;
    double upsilon_se = 0.0; // binomial standard error at theta
    ClusterPattern pattern = ClusterPattern::Unclassified;
};

struct ClusteringReport {
    int n = 0;
    TimeScaleReport scales;
    double psi = 0.0;       // mixing time at epsilon 1/4
    double psi_bound = 0.0; // (beta**)^gamma
    bool psi_warning = false;
    std::vector<ClusteringProbe> probes;
};

// Runs on the largest ladder entry.
ClusteringReport clustering_diagnostics(const ExperimentSpec& spec, const ClusteringOptions& options);

// ---------------------------------------------------------------------------
// Renewal intersection

struct RenewalOptions {
    double horizon = 1e7;
    std::size_t increments = 200000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    double fit_lo = 100.0;
    std::size_t min_tail_count = 200; // fit stops where fewer increments exceed n
    std::size_t laplace_samples = 2000;
    std::size_t laplace_sites = 16;
    std::vector<double> lambdas{0.25, 0.5, 1.0, 2.0, 4.0};
};

struct SurvivalPoint {
    double n = 0.0;
    double survival = 0.0;
    double se = 0.0;
};

struct LaplacePoint {
    double lambda = 0.0;
    double empirical = 0.0;
    double se = 0.0;
    double model = 0.0; // (1 + D lambda^{gamma*})^{-1} with the fitted D
};

struct RenewalResult {
    double gamma = 0.0;
    double target = 0.0; // 2 gamma - 1
    double fitted = 0.0;
    double fitted_se = 0.0;
    double fit_lo = 0.0, fit_hi = 0.0;
    double amplitude = 0.0; // A* in P(G* > n) ~ A* n^{-gamma*}
    std::size_t increments = 0;
    std::size_t censored = 0;
    std::vector<SurvivalPoint> survival;
    double D = 0.0;
    double D_from_amplitude = 0.0; // A* Gamma(1 - gamma*)
    double laplace_max_deviation = 0.0;
    std::size_t laplace_censored = 0;
    std::vector<LaplacePoint> laplace;
};

// One increment: ceil(U^{-1/gamma}), so P(zeta > n) = n^{-gamma}. Capped at cap.
std::uint64_t sample_renewal_increment(double gamma, std::uint64_t cap, Rng& rng);
// First common point of two independent renewal processes started at 0; any value
// above horizon means censored.
std::uint64_t sample_intersection_increment(double gamma, std::uint64_t horizon, Rng& rng);
// Exact laws on 1..nmax (index 0 unused): f(n) of one increment, f*(n) of the
// intersection increment from u*(n) = u(n)^2.
std::vector<double> renewal_increment_law(double gamma, std::size_t nmax);
std::vector<double> intersection_increment_law(double gamma, std::size_t nmax);

RenewalResult renewal_intersection_exponent(double gamma, const RenewalOptions& options);

} // namespace seedbank
