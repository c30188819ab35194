#pragma once

#include "seedbank/criteria.hpp"
#include "seedbank/dual.hpp"
#include "seedbank/experiments.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace seedbank {

// Every numerical default of a run lives in this one table (see README "Defaults").
struct RunSection {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<std::string> formats{"csv", "jsonl", "svg"};
    double budget = 1e12;
    bool strict = false; // flagged diagnostics turn into exit code 4
};

struct ForwardSection {
    std::size_t replicas = 100;
    double horizon = 10.0;
    double observe_every = 1.0;
};

struct DualSection {
    std::vector<DualState> lineages{DualState{0, ActivityState::Active()}, DualState{0, ActivityState::Active()}};
    double d = 1.0; // coalescence rate, matching g = d g_FW
    double horizon = 10.0;
    std::size_t replicas = 10;
    bool record_motion = true;
    bool hazard = false;
    double hazard_T = 100.0;
    std::size_t hazard_replicas = 1000;
};

struct ReturnProbabilitySpec {
    bool tabulated = false;
    double c = 1.0, a = 1.5;          // power law c t^{-a}
    std::vector<double> t, values;    // table
};

struct IntegralSpec {
    ReturnProbabilitySpec a;
    enum class Mode { FiniteRho, InfiniteRho } mode = Mode::FiniteRho;
    double gamma = 1.0;
    double horizon = 1e4;
};

struct CriteriaSection {
    std::vector<CriterionExample> examples;
    std::vector<IntegralSpec> integrals;
};

struct FssSection {
    std::vector<std::string> observables{"theta_hat", "theta_x", "diversity"};
    std::vector<std::string> tasks{"paths"};
    FgOptions fg;
    // Source of Bhat for the variance route: "none", "dual" (hazard intercept on the
    // largest ladder geography) or "value".
    std::string bhat_source = "none";
    double bhat_value = 0.0;
    double hazard_T = 200.0;
    std::size_t hazard_replicas = 5000;
    // Reference diffusion: F from the F g table ("fg_table") or d* theta(1-theta) ("fisher_wright").
    // Without an explicit d*, it is d/(1 + d Bhat) from the Bhat source above.
    std::string reference_source = "fisher_wright";
    std::optional<double> reference_d_star;
    std::size_t reference_replicas = 1000;
    double reference_ds = 1e-3;
    TrappingOptions trapping;
    ClusteringOptions clustering;
};

struct RenewalSection {
    std::vector<double> gammas{0.7, 0.8, 0.9};
    RenewalOptions options;
};

struct Config {
    RunSection run;
    int n = 4; // radius of the single geography used by forward and dual
    ExperimentSpec spec; // geography family, kernel, seed-bank, model, g, initial law, ladder, fss grid
    ForwardSection forward;
    DualSection dual;
    CriteriaSection criteria;
    FssSection fss;
    RenewalSection renewal;
};

// Throws ConfigError naming the offending key path.
Config parse_config(const nlohmann::json& j);
Config parse_config_text(const std::string& text);
Config load_config(const std::filesystem::path& path);

// Fully materialised form; parse_config(emit_config(c)) reproduces c.
nlohmann::json emit_config(const Config& c);

// The canonical dump that the manifest hashes: resolved config minus run.threads.
std::string canonical_config(const Config& c);

} // namespace seedbank
