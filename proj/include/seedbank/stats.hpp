#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace seedbank {

// Welford accumulator.
class RunningStats {
public:
    void add(double v);
    void merge(const RunningStats& other);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const; // unbiased sample variance
    double stddev() const;
    double standard_error() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
};

MeanSE mean_se(std::span<const double> values);

// Neumaier-compensated sum; accurate enough for 1e7 terms of mixed magnitude.
double compensated_sum(std::span<const double> values);

class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double max_abs_residual = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

double quantile(std::vector<double> values, double p);
inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);

// Runs body(i) for i in [0, count) on `threads` workers. Each index is handled by
// exactly one worker; callers write results into slot i so the reduction order
// never depends on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace seedbank
