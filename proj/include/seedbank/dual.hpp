#pragma once

#include "seedbank/forward_sde.hpp"
#include "seedbank/geometry.hpp"
#include "seedbank/random.hpp"
#include "seedbank/seedbank.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace seedbank {

struct Lineage {
    Site site = 0;
    ActivityState state;
    int id = 0;
    bool alive = true;
};

enum class EventType { Migrate, Sleep, Wake, Coalesce };
std::string event_name(EventType t);

// One-lineage jump dynamics b^(1), b^(2) or b^(3). Samplers are stored here, so
// each worker should own its copy.
class LineageDynamics {
public:
    LineageDynamics(const MigrationKernel& kernel, const SeedBankProfile& profile, Model model,
                    std::vector<MigrationKernel> displacement = {});

    const Geography& geography() const { return geo_; }
    const SeedBankProfile& profile() const { return profile_; }
    Model model() const { return model_; }
    double migration_rate() const { return migration_rate_; }
    double chi() const { return exchange_.chi(); }
    double exit_rate(ActivityState s) const;

    struct Jump {
        EventType type;
        Site site;
        ActivityState state;
    };
    const std::vector<KernelEntry>& migration_support() const { return migration_; }
    const std::vector<Site>& displacement_offsets(int m) const { return disp_offsets_[static_cast<std::size_t>(m)]; }
    const std::vector<double>& displacement_weights(int m) const { return disp_weights_[static_cast<std::size_t>(m)]; }

    // The embedded jump out of the current state (no holding time).
    Jump jump(const Lineage& l, Rng& rng) const;

private:
    Geography geo_;
    SeedBankProfile profile_;
    Model model_;
    std::vector<KernelEntry> migration_;
    double migration_rate_ = 0.0;
    ExchangeSampler exchange_;
    mutable std::discrete_distribution<std::size_t> pick_migration_;
    // Model 3: per-colour displacement offsets for falling asleep (reversed) and waking up
    std::vector<std::vector<Site>> disp_offsets_;
    std::vector<std::vector<double>> disp_weights_;
    mutable std::vector<std::discrete_distribution<std::size_t>> pick_disp_;
};

struct LineageStep {
    double elapsed = 0.0;
    Lineage lineage;
    EventType type = EventType::Migrate;
};
LineageStep step_lineage(const Lineage& lineage, const LineageDynamics& dynamics, Rng& rng);

struct CoalescentEvent {
    double t = 0.0;
    EventType type = EventType::Migrate;
    std::vector<int> ids;
    Site site = 0;
    int colour = -1; // -1 for Active
};

struct CoalescentHistory {
    std::vector<CoalescentEvent> events;
    std::vector<Lineage> lineages;          // final states, dead ones marked
    std::vector<std::vector<int>> partition; // blocks of initial ids at the horizon
    double horizon = 0.0;
};

struct CoalescentOptions {
    bool record_events = true;
    bool record_motion = true; // false keeps only coalescences in the log
};

CoalescentHistory run_coalescent(std::vector<Lineage> initial, const LineageDynamics& dynamics, double d,
                                 double horizon, Rng& rng, const CoalescentOptions& options = {});

// A dual site-mode pair: site plus activity state (colour -1 for Active).
struct DualState {
    Site site = 0;
    ActivityState state;
};

struct HazardProfilePoint {
    double t = 0.0;
    double mean = 0.0;
    double se = 0.0;
};

struct HazardEstimate {
    double hazard = 0.0; // replica mean of H(T)
    double se = 0.0;
    std::vector<HazardProfilePoint> profile;
    bool plateau = false;         // last decade grew by less than 1%
    double last_decade_growth = 0.0;
    double slope = 0.0;           // linear asymptote fitted on [T/2, T]
    double intercept = 0.0;
    double intercept_se = 0.0;    // replica-level standard error of the intercept
};

struct HazardOptions {
    std::size_t replicas = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<double> grid; // profile times; default 64 log-spaced points up to T
};

// Two independent, non-coalescing lineages; H(t) is the time up to t during which
// they are co-located and both active.
HazardEstimate estimate_hazard(DualState u1, DualState u2, const LineageDynamics& dynamics, double T,
                               const HazardOptions& options);

struct BurstRecord {
    std::vector<std::pair<double, double>> intervals; // [zeta_k, eta_k)
    std::size_t completed = 0;                         // K(t) at the horizon
    double total = 0.0;                                // C(t) at the horizon
};

BurstRecord joint_activity_bursts(const LineageDynamics& dynamics, double horizon, Rng& rng,
                                  DualState u1 = {}, DualState u2 = {});

// Label of a dual state in S_n = G_n x {A, D_0, ..., D_M}: site * (M+2) + (colour+1).
std::size_t dual_state_index(const DualState& u, int colours);
DualState dual_state_from_index(std::size_t k, int colours);

struct MomentOptions {
    bool exact = true;
    std::size_t size_cap = kExactSizeCap; // on |S_n| for exact evaluation
    std::size_t replicas = 10000;         // Monte Carlo fallback
    std::uint64_t seed = 1;
};

struct MomentEstimate {
    double value = 0.0;
    double error = 0.0; // truncation bound (exact) or standard error (MC)
};

// sum_u b_t(u0, u) field[u], with the field indexed by dual_state_index.
MomentEstimate moment_dual_expectation(std::span<const double> field, const LineageDynamics& dynamics, double t,
                                       DualState u0, const MomentOptions& options = {});

// E[z_{u1}(t) z_{u2}(t)] for the forward system started from the deterministic
// configuration z0 (indexed by dual_state_index) with g = d g_FW, via the two-lineage
// coalescing dual. Exact uniformisation on the pair space for small systems.
MomentEstimate second_moment_dual(const std::vector<double>& z0, const LineageDynamics& dynamics, double d, double t,
                                  DualState u1, DualState u2, const MomentOptions& options = {});

// Full vector u -> z_u of a forward state, indexed by dual_state_index.
std::vector<double> state_field(const SystemState& s);

} // namespace seedbank
