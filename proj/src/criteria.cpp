#include "seedbank/criteria.hpp"
#include "seedbank/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seedbank {

std::string verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Coexistence: return "coexistence";
    case Verdict::Clustering: return "clustering";
    default: return "boundary";
    }
}

ReturnProbability ReturnProbability::power_law(double c, double a) {
    if (!(c > 0.0)) throw std::invalid_argument("return-probability amplitude must be > 0");
    ReturnProbability r;
    r.closed_ = true;
    r.c_ = c;
    r.a_ = a;
    return r;
}

ReturnProbability ReturnProbability::tabulated(std::vector<double> t, std::vector<double> v) {
    if (t.size() < 2 || t.size() != v.size()) throw std::invalid_argument("tabulated return probability needs >= 2 points");
    ReturnProbability r;
    r.closed_ = false;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(t[k] > 0.0) || !(v[k] > 0.0)) throw std::invalid_argument("tabulated times and values must be > 0");
        if (k > 0 && !(t[k] > t[k - 1])) throw std::invalid_argument("tabulated times must increase");
        r.lt_.push_back(std::log(t[k]));
        r.lv_.push_back(std::log(v[k]));
    }
    return r;
}

double ReturnProbability::operator()(double t) const {
    if (closed_) return c_ * std::pow(t, -a_);
    const double x = std::log(t);
    if (x <= lt_.front()) return std::exp(lv_.front());
    if (x >= lt_.back()) return std::exp(lv_.back());
    const auto it = std::upper_bound(lt_.begin(), lt_.end(), x);
    const auto k = static_cast<std::size_t>(it - lt_.begin());
    const double w = (x - lt_[k - 1]) / (lt_[k] - lt_[k - 1]);
    return std::exp(lv_[k - 1] * (1 - w) + lv_[k] * w);
}

double ReturnProbability::max_time() const {
    return closed_ ? std::numeric_limits<double>::infinity() : std::exp(lt_.back());
}

RegimeVerdict coexistence_integral(const ReturnProbability& a, const CriterionMode& mode, double horizon) {
    if (!(horizon > 10.0)) throw std::invalid_argument("criterion horizon must exceed 10 (one decade is fitted)");
    if (horizon > a.max_time() * (1 + 1e-12)) throw std::invalid_argument("horizon beyond the tabulated return probabilities");
    RegimeVerdict out;
    out.evidence = Evidence::NumericalIntegral;
    std::function<double(double)> weight = [](double) { return 1.0; };
    if (auto ir = std::get_if<InfiniteRho>(&mode)) {
        const double g = ir->gamma;
        if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
        weight = [g](double t) { return std::pow(t, -(1.0 - g) / g); };
        out.parameters["gamma"] = g;
    } else if (auto md = std::get_if<Modulated>(&mode)) {
        const double g = md->gamma;
        if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
        if (!md->phi) throw std::invalid_argument("modulated criterion needs a modulation function");
        auto phi = md->phi;
        weight = [g, phi](double t) { return std::pow(phi(t), -1.0 / g) * std::pow(t, -(1.0 - g) / g); };
        out.parameters["gamma"] = g;
    }
    auto f = [&](double t) { return weight(t) * a(t); };

    // adaptive Gauss-Kronrod on log-spaced panels [10^k, 10^{k+1}]
    CompensatedSum finite;
    double quad_error = 0.0;
    double lo = 1.0;
    while (lo < horizon) {
        const double hi = std::min(lo * 10.0, horizon);
        double err = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-12, &err);
        finite.add(v);
        quad_error += err;
        lo = hi;
    }
    out.finite_value = finite.value();

    // power law through the last decade of the integrand
    std::vector<double> lx, ly;
    for (int k = 0; k <= 20; ++k) {
        const double t = horizon / 10.0 * std::pow(10.0, k / 20.0);
        const double v = f(t);
        if (v > 0.0) {
            lx.push_back(std::log(t));
            ly.push_back(std::log(v));
        }
    }
    out.parameters["horizon"] = horizon;
    if (lx.size() < 2) {
        // integrand vanishes at the end of the horizon: nothing left to extrapolate
        out.verdict = Verdict::Coexistence;
        out.total = out.finite_value;
        out.extrapolation_error = quad_error;
        out.tail_exponent = -std::numeric_limits<double>::infinity();
        return out;
    }
    const LinearFit fit = fit_line(lx, ly);
    const double p = fit.slope;
    out.tail_exponent = p;
    if (p < -1.0 - kBoundaryBand) {
        const double C = std::exp(fit.intercept);
        out.tail_value = -C * std::pow(horizon, p + 1.0) / (p + 1.0);
        out.total = out.finite_value + out.tail_value;
        out.extrapolation_error = out.tail_value * (std::exp(fit.max_abs_residual) - 1.0) + quad_error;
        out.verdict = Verdict::Coexistence;
    } else if (p > -1.0 + kBoundaryBand) {
        out.tail_value = std::numeric_limits<double>::infinity();
        out.total = std::numeric_limits<double>::infinity();
        out.verdict = Verdict::Clustering;
    } else {
        out.total = std::numeric_limits<double>::quiet_NaN();
        out.verdict = Verdict::Boundary;
    }
    return out;
}

std::string example_name(const CriterionExample& ex) {
    if (std::holds_alternative<EuclideanExample>(ex)) return "euclidean";
    if (std::holds_alternative<HeavyTailExample>(ex)) return "heavy_tail";
    return "hierarchical";
}

RegimeVerdict classify_example(const CriterionExample& ex) {
    RegimeVerdict out;
    out.evidence = Evidence::ClosedForm;
    auto check_gamma = [](double g) {
        if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
    };
    if (auto e = std::get_if<EuclideanExample>(&ex)) {
        if (!(e->d >= 1.0)) throw std::invalid_argument("dimension d must be >= 1");
        check_gamma(e->gamma);
        const double x = (1.0 - e->gamma) / e->gamma + e->d / 2.0;
        out.parameters = {{"d", e->d}, {"gamma", e->gamma}, {"return_exponent", e->d / 2.0}, {"criterion_exponent", x},
                          {"gamma_threshold", e->d < 4.0 ? 2.0 / (4.0 - e->d) : std::numeric_limits<double>::infinity()}};
        out.verdict = x > 1.0 ? Verdict::Coexistence : Verdict::Clustering;
        return out;
    }
    if (auto h = std::get_if<HeavyTailExample>(&ex)) {
        if (!(h->q > 0.0 && h->q < 2.0)) throw std::invalid_argument("tail exponent q must lie in (0,2)");
        check_gamma(h->gamma);
        const double x = (1.0 - h->gamma) / h->gamma + 1.0 / h->q;
        out.parameters = {{"q", h->q}, {"gamma", h->gamma}, {"return_exponent", 1.0 / h->q}, {"criterion_exponent", x},
                          {"gamma_threshold", h->q > 0.5 ? h->q / (2.0 * h->q - 1.0) : std::numeric_limits<double>::infinity()}};
        out.verdict = x > 1.0 ? Verdict::Coexistence : Verdict::Clustering;
        return out;
    }
    const auto& hr = std::get<HierarchicalExample>(ex);
    if (!(hr.N >= 2.0)) throw std::invalid_argument("hierarchical order N must be >= 2");
    if (!(hr.c > 0.0 && hr.c < hr.N)) throw std::invalid_argument("hierarchical growth base must satisfy 0 < c < N");
    if (!(hr.K > 0.0 && hr.e > 0.0)) throw std::invalid_argument("hierarchical seed-bank needs K > 0 and e > 0");
    if (!(hr.K * hr.e < hr.N)) throw std::invalid_argument("hierarchical seed-bank needs K e < N");
    if (!(hr.e < hr.N)) throw std::invalid_argument("hierarchical seed-bank needs e < N");
    if (!(hr.K >= 1.0)) throw std::invalid_argument("the rho = infinity hierarchical criterion needs K >= 1");
    const double lN = std::log(hr.N), lc = std::log(hr.c), lK = std::log(hr.K), le = std::log(hr.e);
    const double gammaN = std::log(hr.N / (hr.K * hr.e)) / std::log(hr.N / hr.e);
    const double deltaN = lc / std::log(hr.N / hr.c);
    const double lhs = lN * (lK + lc);
    const double rhs = lc * (2.0 * lK + le);
    out.parameters = {{"N", hr.N},          {"c", hr.c},         {"K", hr.K},       {"e", hr.e},
                      {"gamma_N", gammaN}, {"delta_N", deltaN}, {"log_lhs", lhs}, {"log_rhs", rhs}};
    out.verdict = lhs > rhs ? Verdict::Coexistence : Verdict::Clustering;
    return out;
}

double renormalize_fw(double d, double bhat) {
    if (!(d > 0.0)) throw std::invalid_argument("resampling rate d must be > 0");
    if (!(bhat >= 0.0)) throw std::invalid_argument("hazard Bhat must be >= 0");
    return d / (1.0 + d * bhat);
}

} // namespace seedbank
