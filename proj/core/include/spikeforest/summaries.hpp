#pragma once

#include <map>
#include <vector>

#include "spikeforest/mcmc.hpp"

namespace spikeforest {

struct PosteriorSummary {
    std::vector<double> inclusion;        // posterior inclusion probability per variable
    std::map<int, double> k_pmf;          // total leaf count
    std::vector<double> mean_fit;         // posterior mean of f at the design points
    bool has_error = false;               // true when f0 was supplied to the chain
    double err_median = 0.0;
    double err_q05 = 0.0;
    double err_q95 = 0.0;
};

PosteriorSummary posterior_summaries(const ChainTrace& trace);

// Posterior mass of { total leaves > threshold }.
double k_mass_above(const ChainTrace& trace, double threshold);

// Merge traces from multiple chains over the same data.
ChainTrace merge_traces(std::vector<ChainTrace> traces);

}  // namespace spikeforest
