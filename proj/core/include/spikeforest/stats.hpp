#pragma once

#include <span>
#include <vector>

namespace spikeforest {

double log_sum_exp(std::span<const double> log_terms);

// log(binomial(n, k)) via lgamma
double log_choose(int n, int k);

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double prob);

double median(std::vector<double> values);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Ordinary least squares y = intercept + slope * x.
SlopeFit fit_slope(std::span<const double> x, std::span<const double> y);

// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_survival(double statistic, int dof);

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

// Goodness-of-fit test of observed counts against expected probabilities.
// Bins with expected count below `min_expected` are pooled into one.
ChiSquareResult chi_square_gof(std::span<const long long> observed,
                               std::span<const double> expected_probs,
                               double min_expected = 5.0);

}  // namespace spikeforest
