#include "spikeforest/exact_posterior.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spikeforest/combinatorics.hpp"
#include "spikeforest/marginal.hpp"
#include "spikeforest/mcmc.hpp"
#include "spikeforest/stats.hpp"

namespace spikeforest {

double ExactPosterior::probability_of(const std::string& key) const {
    for (const auto& s : states)
        if (s.key == key) return s.probability;
    return 0.0;
}

ExactPosterior exact_posterior_enumeration(const Dataset& data, const PriorConfig& prior,
                                           const EnumerationCaps& caps) {
    prior.validate();
    if (data.n() > caps.max_n || data.p() > caps.max_p)
        throw std::invalid_argument("exact_posterior_enumeration: instance exceeds caps");
    const int K_cap = std::min(caps.max_K, prior.effective_K_max(data.n()));
    const int p = data.p();
    const double v = prior.tree_step_variance(1);

    // Prior pieces share the chain's truncation so the measures agree.
    PriorConfig trunc = prior;
    trunc.K_max = K_cap;

    ExactPosterior post;
    // subsets by bitmask, sizes 0..p
    for (int mask = 0; mask < (1 << p); ++mask) {
        std::vector<int> subset;
        for (int j = 0; j < p; ++j)
            if (mask & (1 << j)) subset.push_back(j);
        const int q = static_cast<int>(subset.size());
        for (int K = 1; K <= K_cap; ++K) {
            if (K < q + 1) continue;  // a tree cannot use all axes otherwise
            std::vector<EnumeratedPartition> parts;
            try {
                parts = enumerate_valid_trees(data, subset, K, prior.cbar, caps.sequence_cap);
            } catch (const std::invalid_argument&) {
                throw std::invalid_argument(
                    "exact_posterior_enumeration: sequence cap exceeded");
            }
            if (parts.empty()) continue;
            const double shape = log_prior_q(q, p, prior) + log_prior_subset(subset, q, p) +
                                 log_prior_K(K, trunc) -
                                 log_partitioning_number(data.n(), q, K);
            for (auto& part : parts) {
                PosteriorState st;
                st.subset = subset;
                st.K = K;
                st.signature = std::move(part.signature);
                st.representative = std::move(part.representative);
                st.key = model_state_key(subset, st.representative, data);
                st.log_weight =
                    shape + part.log_sequence_multiplicity +
                    log_marginal_likelihood_tree(st.representative, data, data.y(), v);
                post.states.push_back(std::move(st));
            }
        }
    }
    if (post.states.empty())
        throw std::runtime_error("exact_posterior_enumeration: empty state space");

    std::vector<double> lw(post.states.size());
    for (std::size_t i = 0; i < post.states.size(); ++i) lw[i] = post.states[i].log_weight;
    post.log_normalizer = log_sum_exp(lw);

    post.inclusion.assign(p, 0.0);
    double best = -1.0;
    for (std::size_t i = 0; i < post.states.size(); ++i) {
        auto& st = post.states[i];
        st.probability = std::exp(st.log_weight - post.log_normalizer);
        for (int j : st.subset) post.inclusion[j] += st.probability;
        post.k_pmf[st.K] += st.probability;
        if (st.probability > best) {
            best = st.probability;
            post.mode_index = static_cast<int>(i);
        }
    }
    std::vector<std::size_t> order(post.states.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return post.states[a].key < post.states[b].key;
    });
    std::vector<PosteriorState> sorted;
    sorted.reserve(post.states.size());
    int new_mode = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (order[r] == static_cast<std::size_t>(post.mode_index))
            new_mode = static_cast<int>(r);
        sorted.push_back(std::move(post.states[order[r]]));
    }
    post.states = std::move(sorted);
    post.mode_index = new_mode;
    return post;
}

}  // namespace spikeforest
