#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spikeforest/rng.hpp"
#include "spikeforest/tree.hpp"

namespace spikeforest {

enum class StepVarianceMode { Unit, OneOverT };

enum class SamplerMode { Cart, ForestSharedS, ForestPerTreeS };

struct PriorConfig {
    double a = 2.5;        // subset-size decay exponent; > 2 for the product variant
    double c = 2.718281828459045;
    double lambda = 10.0;  // Poisson intensity on leaves
    double C_T = 1.0;      // tree-count decay; must exceed log 2
    int cbar = 1;          // validity constant
    double step_variance = 1.0;
    StepVarianceMode step_variance_mode = StepVarianceMode::Unit;
    int K_max = 0;  // 0 = untruncated densities; chains derive floor(n/cbar^2)
    int T_max = 0;  // 0 = derive n
    std::optional<double> gw_gamma;  // split probability of the Galton-Watson variant

    void validate() const;
    int effective_K_max(int n) const;
    int effective_T_max(int n) const { return T_max > 0 ? T_max : n; }
    double tree_step_variance(int T) const {
        return step_variance_mode == StepVarianceMode::OneOverT ? step_variance / T
                                                                : step_variance;
    }
};

// pi(q) proportional to c^-q * p^-aq on {0..p}, normalized.
double log_prior_q(int q, int p, const PriorConfig& cfg);

// pi(S | q) = 1 / C(p, q).
double log_prior_subset(std::span<const int> subset, int q, int p);

// Zero-truncated Poisson(lambda) on {1,2,...}, renormalized over {1..K_max}
// when cfg.K_max is set.
double log_prior_K(int K, const PriorConfig& cfg);

// Forest variant with intensity lambda / T.
double log_prior_K_forest(int K, int T, const PriorConfig& cfg);

// Number of leaves of a Galton-Watson tree in which every node splits
// independently with probability gamma, truncated at K_max (or at
// effective_K_max(default 64) when untruncated).
double log_prior_K_galton_watson(int K, const PriorConfig& cfg);
std::vector<double> galton_watson_leaf_pmf(double gamma, int K_max);

// -log Delta(V^K_S) when the tree is valid at level cbar and splits on every
// axis of `subset` at least once (and nothing else); -infinity otherwise.
double log_prior_tree(const TreePartition& tree, std::span<const int> subset, int K,
                      const Dataset& data, const PriorConfig& cfg);

// Sum of iid normal log densities for the step heights. T controls the
// variance in one-over-T mode.
double log_prior_steps(std::span<const double> beta, const PriorConfig& cfg, int T = 1);

// pi(T) proportional to exp(-C_T * T), normalized over {1..T_max}.
double log_prior_T(int T, int n, const PriorConfig& cfg);

// log pi(T) + sum_t log pi(K^t | T) + shared subset terms.
double log_prior_forest_shape(int T, std::span<const int> K_vec, int q, int p, int n,
                              const PriorConfig& cfg);
// Per-tree subset variant: independent products over trees.
double log_prior_forest_shape(int T, std::span<const int> K_vec, std::span<const int> q_vec,
                              int p, int n, const PriorConfig& cfg);

struct ModelState {
    SamplerMode mode = SamplerMode::Cart;
    std::vector<std::vector<int>> subsets;  // one entry in cart / shared-S modes
    std::vector<TreePartition> trees;       // one entry in cart mode
    std::vector<std::vector<double>> betas;

    int tree_count() const { return static_cast<int>(trees.size()); }
    int total_leaves() const;
};

struct PriorSampleDiagnostics {
    long long config_redraws = 0;  // (q,S,K) combinations with no valid tree
    long long sequence_rejections = 0;
    long long enumeration_fallbacks = 0;
};

// Ancestral draw through the hierarchy q -> S -> K (-> T) -> tree -> steps.
// Tree topologies are drawn uniformly over split sequences by rejection, with
// exact enumeration as fallback on feasible instances.
ModelState sample_from_prior(const PriorConfig& cfg, const Dataset& data, SamplerMode mode,
                             Rng& rng, PriorSampleDiagnostics* diag = nullptr);

// Uniform-over-sequences rejection draw of a valid tree with K leaves using
// exactly the axes in `subset`. Returns nullopt when the attempt cap is hit.
std::optional<TreePartition> sample_tree_by_rejection(const Dataset& data,
                                                      std::span<const int> subset, int K,
                                                      int cbar, Rng& rng,
                                                      int max_attempts = 20000,
                                                      long long* rejections = nullptr);

}  // namespace spikeforest
