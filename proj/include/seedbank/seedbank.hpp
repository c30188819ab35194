#pragma once

#include "seedbank/random.hpp"

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace seedbank {

struct PolynomialBank {
    double A = 1.0, alpha = 0.5, B = 1.0, beta = 1.0;
};
struct HierarchicalBank {
    double K = 1.0, e = 1.0;
    int N = 2;
};
struct ExplicitBank {};
using BankProvenance = std::variant<PolynomialBank, HierarchicalBank, ExplicitBank>;

std::string provenance_name(const BankProvenance& p);

// Colour-indexed coefficients (K_m, e_m), m = 0..M.
class SeedBankProfile {
public:
    // Polynomial: K_m = A (m+1)^{-alpha}, e_m = B (m+1)^{-beta} (index shifted by one).
    static SeedBankProfile polynomial(const PolynomialBank& p, int M);
    // Hierarchical: K_m = K^m, e_m = e^m / N^m.
    static SeedBankProfile hierarchical(const HierarchicalBank& h, int M);
    static SeedBankProfile explicit_profile(std::vector<double> K, std::vector<double> e);
    // Model 1: one dormant colour.
    static SeedBankProfile single(double K, double e) { return explicit_profile({K}, {e}); }

    int M() const { return static_cast<int>(K_.size()) - 1; }
    int colours() const { return static_cast<int>(K_.size()); }
    const std::vector<double>& K() const { return K_; }
    const std::vector<double>& e() const { return e_; }
    const BankProvenance& provenance() const { return provenance_; }

    // Polynomial with alpha <= 1 < alpha + beta: the rho = infinity asymptotics apply.
    std::optional<double> gamma() const;

private:
    SeedBankProfile(std::vector<double> K, std::vector<double> e, BankProvenance p);
    std::vector<double> K_, e_;
    BankProvenance provenance_;
};

struct SeedBankSummary {
    double chi = 0.0;   // sum K_m e_m
    double rho = 0.0;   // sum K_m
    std::optional<double> gamma;
    // C = A/(beta chi) B^{1-gamma} Gamma(gamma), the asymptotic constant of P(tau > t) ~ C t^{-gamma}.
    // Asymptotic and not corrected for the index shift.
    std::optional<double> tail_constant;
    double f = 1.0;     // 1/(1+rho)
    double kappa = 1.0; // (1+rho)^2
};

SeedBankSummary summarize(const SeedBankProfile& profile);

// Lineage activity: colour < 0 means Active, otherwise Dormant(colour).
struct ActivityState {
    int colour = -1;
    bool active() const { return colour < 0; }
    static ActivityState Active() { return {-1}; }
    static ActivityState Dormant(int m) { return {m}; }
    bool operator==(const ActivityState&) const = default;
};

struct Exchange {
    double duration = 0.0;
    ActivityState next;
};

// Go-to-sleep / wake-up sampler. Holds the colour distribution K_m e_m / chi.
class ExchangeSampler {
public:
    explicit ExchangeSampler(const SeedBankProfile& profile);
    Exchange sample(ActivityState current, Rng& rng) const;
    int sample_colour(Rng& rng) const { return colour_(rng); }
    // Wake-up time of a freshly dormant lineage: colour drawn as above, then Exp(e_m).
    double sample_wake_up(Rng& rng) const;
    double chi() const { return chi_; }
    const std::vector<double>& colour_probabilities() const { return probs_; }

private:
    std::vector<double> e_;
    std::vector<double> probs_;
    double chi_;
    mutable std::discrete_distribution<int> colour_;
};

Exchange sample_exchange(const SeedBankProfile& profile, ActivityState current, Rng& rng);

// Exact mixture tail P(tau > t) = sum_m (K_m e_m / chi) e^{-e_m t}.
double wake_up_survival(const SeedBankProfile& profile, double t);

} // namespace seedbank
