#include "seedbank/seedbank.hpp"
#include "seedbank/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <stdexcept>

namespace seedbank {

std::string provenance_name(const BankProvenance& p) {
    if (std::holds_alternative<PolynomialBank>(p)) return "polynomial";
    if (std::holds_alternative<HierarchicalBank>(p)) return "hierarchical";
    return "explicit";
}

SeedBankProfile::SeedBankProfile(std::vector<double> K, std::vector<double> e, BankProvenance p)
    : K_(std::move(K)), e_(std::move(e)), provenance_(p) {
    if (K_.empty() || K_.size() != e_.size()) throw std::invalid_argument("seed-bank K and e must have equal length >= 1");
    for (std::size_t m = 0; m < K_.size(); ++m) {
        if (!(K_[m] > 0.0) || !std::isfinite(K_[m])) throw std::invalid_argument("seed-bank K_m must be finite and > 0");
        if (!(e_[m] > 0.0) || !std::isfinite(e_[m])) throw std::invalid_argument("seed-bank e_m must be finite and > 0");
    }
}

SeedBankProfile SeedBankProfile::polynomial(const PolynomialBank& p, int M) {
    if (M < 0) throw std::invalid_argument("seed-bank depth M must be >= 0");
    if (!(p.A > 0.0) || !(p.B > 0.0)) throw std::invalid_argument("polynomial seed-bank needs A > 0 and B > 0");
    std::vector<double> K(static_cast<std::size_t>(M) + 1), e(K.size());
    for (int m = 0; m <= M; ++m) {
        K[static_cast<std::size_t>(m)] = p.A * std::pow(m + 1.0, -p.alpha);
        e[static_cast<std::size_t>(m)] = p.B * std::pow(m + 1.0, -p.beta);
    }
    return SeedBankProfile(std::move(K), std::move(e), p);
}

SeedBankProfile SeedBankProfile::hierarchical(const HierarchicalBank& h, int M) {
    if (M < 0) throw std::invalid_argument("seed-bank depth M must be >= 0");
    if (!(h.K > 0.0) || !(h.e > 0.0)) throw std::invalid_argument("hierarchical seed-bank needs K > 0 and e > 0");
    if (h.N < 2) throw std::invalid_argument("hierarchical seed-bank needs N >= 2");
    if (!(h.K * h.e < h.N)) throw std::invalid_argument("hierarchical seed-bank needs K e < N");
    std::vector<double> K(static_cast<std::size_t>(M) + 1), e(K.size());
    for (int m = 0; m <= M; ++m) {
        K[static_cast<std::size_t>(m)] = std::pow(h.K, m);
        e[static_cast<std::size_t>(m)] = std::pow(h.e / h.N, m);
    }
    return SeedBankProfile(std::move(K), std::move(e), h);
}

SeedBankProfile SeedBankProfile::explicit_profile(std::vector<double> K, std::vector<double> e) {
    return SeedBankProfile(std::move(K), std::move(e), ExplicitBank{});
}

std::optional<double> SeedBankProfile::gamma() const {
    if (auto p = std::get_if<PolynomialBank>(&provenance_)) {
        if (p->alpha <= 1.0 && 1.0 < p->alpha + p->beta && p->beta > 0.0) return (p->alpha + p->beta - 1.0) / p->beta;
    }
    return std::nullopt;
}

SeedBankSummary summarize(const SeedBankProfile& profile) {
    CompensatedSum chi, rho;
    for (int m = 0; m <= profile.M(); ++m) {
        chi.add(profile.K()[static_cast<std::size_t>(m)] * profile.e()[static_cast<std::size_t>(m)]);
        rho.add(profile.K()[static_cast<std::size_t>(m)]);
    }
    SeedBankSummary s;
    s.chi = chi.value();
    s.rho = rho.value();
    s.f = 1.0 / (1.0 + s.rho);
    s.kappa = (1.0 + s.rho) * (1.0 + s.rho);
    s.gamma = profile.gamma();
    if (s.gamma) {
        const auto& p = std::get<PolynomialBank>(profile.provenance());
        const double g = *s.gamma;
        s.tail_constant = p.A / (p.beta * s.chi) * std::pow(p.B, 1.0 - g) * boost::math::tgamma(g);
    }
    return s;
}

ExchangeSampler::ExchangeSampler(const SeedBankProfile& profile) : e_(profile.e()) {
    std::vector<double> w(e_.size());
    for (std::size_t m = 0; m < w.size(); ++m) w[m] = profile.K()[m] * e_[m];
    chi_ = compensated_sum(w);
    probs_.resize(w.size());
    for (std::size_t m = 0; m < w.size(); ++m) probs_[m] = w[m] / chi_;
    colour_ = std::discrete_distribution<int>(w.begin(), w.end());
}

Exchange ExchangeSampler::sample(ActivityState current, Rng& rng) const {
    if (current.active()) {
        const double d = std::exponential_distribution<double>(chi_)(rng);
        return {d, ActivityState::Dormant(colour_(rng))};
    }
    if (current.colour >= static_cast<int>(e_.size())) throw std::invalid_argument("dormant colour exceeds M");
    const double d = std::exponential_distribution<double>(e_[static_cast<std::size_t>(current.colour)])(rng);
    return {d, ActivityState::Active()};
}

double ExchangeSampler::sample_wake_up(Rng& rng) const {
    const int m = colour_(rng);
    return std::exponential_distribution<double>(e_[static_cast<std::size_t>(m)])(rng);
}

Exchange sample_exchange(const SeedBankProfile& profile, ActivityState current, Rng& rng) {
    return ExchangeSampler(profile).sample(current, rng);
}

double wake_up_survival(const SeedBankProfile& profile, double t) {
    CompensatedSum num, chi;
    for (int m = 0; m <= profile.M(); ++m) {
        const double w = profile.K()[static_cast<std::size_t>(m)] * profile.e()[static_cast<std::size_t>(m)];
        chi.add(w);
        num.add(w * std::exp(-profile.e()[static_cast<std::size_t>(m)] * t));
    }
    return num.value() / chi.value();
}

} // namespace seedbank
