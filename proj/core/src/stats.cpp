#include "spikeforest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace spikeforest {

double log_sum_exp(std::span<const double> log_terms) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : log_terms) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : log_terms) s += std::exp(v - m);
    return m + std::log(s);
}

double log_choose(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("log_choose: k out of range");
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("quantile: prob outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = prob * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * values[lo] + w * values[hi];
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

SlopeFit fit_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_slope: need two or more paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("fit_slope: degenerate x values");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

double chi_square_survival(double statistic, int dof) {
    if (dof < 1) throw std::invalid_argument("chi_square_survival: dof must be positive");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

ChiSquareResult chi_square_gof(std::span<const long long> observed,
                               std::span<const double> expected_probs,
                               double min_expected) {
    if (observed.size() != expected_probs.size() || observed.empty())
        throw std::invalid_argument("chi_square_gof: mismatched inputs");
    long long total = 0;
    for (long long c : observed) total += c;
    if (total <= 0) throw std::invalid_argument("chi_square_gof: no observations");

    // Pool low-expectation bins so the chi-square approximation is usable.
    std::vector<double> exp_counts;
    std::vector<double> obs_counts;
    double pooled_exp = 0.0, pooled_obs = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_probs[i] * static_cast<double>(total);
        if (e < min_expected) {
            pooled_exp += e;
            pooled_obs += static_cast<double>(observed[i]);
        } else {
            exp_counts.push_back(e);
            obs_counts.push_back(static_cast<double>(observed[i]));
        }
    }
    if (pooled_exp > 0.0) {
        exp_counts.push_back(pooled_exp);
        obs_counts.push_back(pooled_obs);
    }
    ChiSquareResult res;
    res.dof = static_cast<int>(exp_counts.size()) - 1;
    if (res.dof < 1) {
        // Everything pooled into one bin: the test carries no information.
        res.dof = 0;
        res.p_value = 1.0;
        return res;
    }
    for (std::size_t i = 0; i < exp_counts.size(); ++i) {
        const double d = obs_counts[i] - exp_counts[i];
        res.statistic += d * d / exp_counts[i];
    }
    res.p_value = chi_square_survival(res.statistic, res.dof);
    return res;
}

}  // namespace spikeforest
