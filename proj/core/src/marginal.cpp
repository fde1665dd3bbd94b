#include "spikeforest/marginal.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "spikeforest/stats.hpp"

namespace spikeforest {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

double cell_log_marginal(int n_k, double sum_r, double sum_r2, double step_variance) {
    const double v = step_variance;
    return -0.5 * n_k * kLog2Pi - 0.5 * std::log(n_k * v + 1.0) - 0.5 * sum_r2 +
           v * sum_r * sum_r / (2.0 * (n_k * v + 1.0));
}

double cell_posterior_mean(int n_k, double sum_r, double step_variance) {
    return step_variance * sum_r / (n_k * step_variance + 1.0);
}

double cell_posterior_variance(int n_k, double step_variance) {
    return step_variance / (n_k * step_variance + 1.0);
}

double log_marginal_likelihood_tree(const TreePartition& tree, const Dataset& data,
                                    std::span<const double> residual_targets,
                                    double step_variance) {
    if (static_cast<int>(residual_targets.size()) != data.n())
        throw std::invalid_argument("log_marginal_likelihood_tree: residual length != n");
    const auto members = tree.assign(data);
    double total = 0.0;
    for (const auto& cell : members) {
        if (cell.empty())
            throw std::invalid_argument("log_marginal_likelihood_tree: empty leaf");
        double s = 0.0, q = 0.0;
        for (int i : cell) {
            s += residual_targets[i];
            q += residual_targets[i] * residual_targets[i];
        }
        total += cell_log_marginal(static_cast<int>(cell.size()), s, q, step_variance);
    }
    return total;
}

double cell_log_marginal_quadrature(std::span<const double> residuals, double step_variance,
                                    int panels, double half_width_sd) {
    if (residuals.empty()) throw std::invalid_argument("quadrature: empty cell");
    const int n_k = static_cast<int>(residuals.size());
    double s = 0.0;
    for (double r : residuals) s += r;
    const double center = cell_posterior_mean(n_k, s, step_variance);
    const double sd = std::sqrt(cell_posterior_variance(n_k, step_variance));
    const double lo = center - half_width_sd * sd;
    const double hi = center + half_width_sd * sd;
    const int m = panels % 2 == 0 ? panels : panels + 1;
    const double h = (hi - lo) / m;

    auto log_integrand = [&](double beta) {
        double acc = -0.5 * std::log(6.283185307179586 * step_variance) -
                     beta * beta / (2.0 * step_variance);
        for (double r : residuals) {
            const double d = r - beta;
            acc += -0.5 * kLog2Pi - 0.5 * d * d;
        }
        return acc;
    };

    // Simpson weights, summed in log space for numerical safety.
    std::vector<double> terms;
    terms.reserve(m + 1);
    for (int i = 0; i <= m; ++i) {
        const double w = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        terms.push_back(std::log(w) + log_integrand(lo + i * h));
    }
    return log_sum_exp(terms) + std::log(h / 3.0);
}

}  // namespace spikeforest
