#pragma once

#include <map>
#include <string>
#include <vector>

#include "spikeforest/prior.hpp"

namespace spikeforest {

struct EnumerationCaps {
    int max_n = 6;
    int max_p = 2;
    int max_K = 3;
    long long sequence_cap = 1000000;
};

struct PosteriorState {
    std::vector<int> subset;
    int K = 1;
    std::vector<std::vector<int>> signature;
    std::string key;  // matches model_state_key of the chains
    TreePartition representative;
    double log_weight = 0.0;
    double probability = 0.0;
};

struct ExactPosterior {
    std::vector<PosteriorState> states;  // sorted by key
    double log_normalizer = 0.0;
    std::vector<double> inclusion;  // per-variable posterior inclusion
    std::map<int, double> k_pmf;
    int mode_index = 0;

    const PosteriorState& mode() const { return states[mode_index]; }
    double probability_of(const std::string& key) const;
};

// Ground-truth posterior over (q, S, K, partition) by full enumeration of
// valid tree objects. Each distinct data partition is weighted by its
// split-sequence multiplicity so the uniform-over-sequences tree prior is
// honored; the chains target the same measure.
ExactPosterior exact_posterior_enumeration(const Dataset& data, const PriorConfig& prior,
                                           const EnumerationCaps& caps = {});

}  // namespace spikeforest
