#pragma once

#include <span>

#include "spikeforest/tree.hpp"

namespace spikeforest {

// log integral over beta of prod_i N(r_i | beta, 1) * N(beta | 0, v) for one
// cell with n_k points, residual sum S and sum of squares Q:
//   -(n_k/2) log 2pi - (1/2) log(n_k v + 1) - Q/2 + v S^2 / (2 (n_k v + 1))
double cell_log_marginal(int n_k, double sum_r, double sum_r2, double step_variance);

// Posterior for the cell step: N(v S / (n_k v + 1), v / (n_k v + 1)).
double cell_posterior_mean(int n_k, double sum_r, double step_variance);
double cell_posterior_variance(int n_k, double step_variance);

// Exact log marginal likelihood of residual targets under a tree with iid
// N(0, v) steps and unit observation noise; cells integrate independently.
double log_marginal_likelihood_tree(const TreePartition& tree, const Dataset& data,
                                    std::span<const double> residual_targets,
                                    double step_variance);

// Independent numeric oracle: per-cell 1-D integral by composite Simpson on a
// wide bracket around the posterior mean, evaluated in log space.
double cell_log_marginal_quadrature(std::span<const double> residuals, double step_variance,
                                    int panels = 20000, double half_width_sd = 12.0);

}  // namespace spikeforest
