#pragma once

#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace seedbank {

enum class Verdict { Coexistence, Clustering, Boundary };
enum class Evidence { ClosedForm, NumericalIntegral };
std::string verdict_name(Verdict v);

struct RegimeVerdict {
    Verdict verdict = Verdict::Boundary;
    Evidence evidence = Evidence::ClosedForm;
    // NumericalIntegral: integral over [1, H], its power-law tail beyond H, and the
    // error of that extrapolation. `tail_exponent` is the fitted integrand exponent p
    // (integrand ~ t^p), so convergence needs p < -1.
    double finite_value = 0.0;
    double tail_value = 0.0;
    double total = 0.0;
    double extrapolation_error = 0.0;
    double tail_exponent = 0.0;
    std::map<std::string, double> parameters; // echoed inputs and derived exponents
};

// t -> a_t(0,0): either c t^{-a} or a table interpolated log-log.
class ReturnProbability {
public:
    static ReturnProbability power_law(double c, double a);
    static ReturnProbability tabulated(std::vector<double> t, std::vector<double> values);
    double operator()(double t) const;
    double max_time() const;

private:
    bool closed_ = true;
    double c_ = 1.0, a_ = 1.0;
    std::vector<double> lt_, lv_;
};

struct FiniteRho {};
struct InfiniteRho {
    double gamma = 1.0;
};
struct Modulated {
    double gamma = 1.0;
    std::function<double(double)> phi; // slowly varying modulation of the wake-up tail
};
using CriterionMode = std::variant<FiniteRho, InfiniteRho, Modulated>;

inline constexpr double kBoundaryBand = 0.05;

RegimeVerdict coexistence_integral(const ReturnProbability& a, const CriterionMode& mode, double horizon);

struct EuclideanExample {
    double d = 1.0;
    double gamma = 1.0;
};
struct HeavyTailExample {
    double q = 1.0;
    double gamma = 1.0;
};
struct HierarchicalExample {
    double N = 2.0, c = 1.0, K = 1.0, e = 1.0;
};
using CriterionExample = std::variant<EuclideanExample, HeavyTailExample, HierarchicalExample>;

RegimeVerdict classify_example(const CriterionExample& example);
std::string example_name(const CriterionExample& example);

// d* = d / (1 + d Bhat)
double renormalize_fw(double d, double bhat);

} // namespace seedbank
