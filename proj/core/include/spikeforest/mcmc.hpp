#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spikeforest/dataset.hpp"
#include "spikeforest/prior.hpp"

namespace spikeforest {

struct MoveProbabilities {
    double grow = 0.25;
    double prune = 0.25;
    double change = 0.20;
    double swap = 0.10;
    double var_add = 0.08;
    double var_remove = 0.08;
    double var_swap = 0.04;
    double tree_birth = 0.0;
    double tree_death = 0.0;

    void validate(SamplerMode mode) const;
    static MoveProbabilities cart_default() { return MoveProbabilities{}; }
    static MoveProbabilities forest_default();
};

struct ChainConfig {
    long long iterations = 20000;
    long long burn_in = -1;  // -1 selects iterations / 5
    int thinning = 1;
    std::uint64_t seed = 1;
    MoveProbabilities moves;
    SamplerMode mode = SamplerMode::Cart;
    int initial_trees = 5;       // forest modes; fixed tree count in shared-S mode
    bool record_states = false;  // canonical state keys per kept draw (tiny instances)
    bool record_fit = true;
    bool check_residuals = false;  // compare incremental fits against full recomputation

    long long effective_burn_in() const { return burn_in >= 0 ? burn_in : iterations / 5; }
    void validate() const;
};

struct KeptSample {
    int q = 0;        // active variables (union over trees)
    int T = 1;        // trees
    int K_total = 1;  // leaves (sum over trees)
    double log_posterior = 0.0;
    double err_n = std::numeric_limits<double>::quiet_NaN();  // ||f - f0||_n when known
};

struct ChainTrace {
    std::vector<KeptSample> samples;
    std::vector<long long> inclusion_counts;  // kept draws containing each variable
    std::map<int, long long> k_histogram;     // total leaf count -> kept draws
    std::vector<double> mean_fit;             // running posterior mean of f at design points
    long long kept = 0;
    long long proposals = 0;
    long long accepts = 0;
    std::vector<std::string> state_keys;  // filled when record_states is set

    double acceptance_rate() const {
        return proposals > 0 ? static_cast<double>(accepts) / proposals : 0.0;
    }
};

// Canonical comparable state: sorted active set plus the induced grouping.
std::string model_state_key(std::span<const int> subset, const TreePartition& tree,
                            const Dataset& data);

// Reversible-jump Metropolis-Hastings over (q, S, K, tree) with the step
// heights integrated out of every acceptance ratio. Steps are only
// instantiated to record fitted values.
ChainTrace run_cart_chain(const Dataset& data, const PriorConfig& prior, const ChainConfig& cfg,
                          std::span<const double> f0_values = {});

// Bayesian backfitting over a forest: per sweep each tree is updated against
// the residuals of the others through the single-tree kernel; in per-tree-S
// mode the tree count moves by paired birth/death of single-leaf trees.
ChainTrace run_forest_chain(const Dataset& data, const PriorConfig& prior,
                            const ChainConfig& cfg, std::span<const double> f0_values = {});

}  // namespace spikeforest
