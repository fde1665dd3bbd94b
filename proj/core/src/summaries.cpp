#include "spikeforest/summaries.hpp"

#include <cmath>
#include <stdexcept>

#include "spikeforest/stats.hpp"

namespace spikeforest {

PosteriorSummary posterior_summaries(const ChainTrace& trace) {
    if (trace.kept == 0) throw std::invalid_argument("posterior_summaries: empty trace");
    PosteriorSummary s;
    const double denom = static_cast<double>(trace.kept);
    s.inclusion.resize(trace.inclusion_counts.size());
    for (std::size_t j = 0; j < s.inclusion.size(); ++j)
        s.inclusion[j] = static_cast<double>(trace.inclusion_counts[j]) / denom;
    for (const auto& [k, c] : trace.k_histogram) s.k_pmf[k] = static_cast<double>(c) / denom;
    s.mean_fit = trace.mean_fit;

    std::vector<double> errs;
    errs.reserve(trace.samples.size());
    for (const auto& kept : trace.samples)
        if (!std::isnan(kept.err_n)) errs.push_back(kept.err_n);
    if (!errs.empty()) {
        s.has_error = true;
        s.err_median = median(errs);
        s.err_q05 = quantile(errs, 0.05);
        s.err_q95 = quantile(errs, 0.95);
    }
    return s;
}

double k_mass_above(const ChainTrace& trace, double threshold) {
    if (trace.kept == 0) throw std::invalid_argument("k_mass_above: empty trace");
    long long hits = 0;
    for (const auto& [k, c] : trace.k_histogram)
        if (static_cast<double>(k) > threshold) hits += c;
    return static_cast<double>(hits) / static_cast<double>(trace.kept);
}

ChainTrace merge_traces(std::vector<ChainTrace> traces) {
    if (traces.empty()) throw std::invalid_argument("merge_traces: nothing to merge");
    ChainTrace merged = std::move(traces.front());
    for (std::size_t c = 1; c < traces.size(); ++c) {
        auto& t = traces[c];
        if (t.inclusion_counts.size() != merged.inclusion_counts.size())
            throw std::invalid_argument("merge_traces: traces disagree on p");
        for (std::size_t j = 0; j < merged.inclusion_counts.size(); ++j)
            merged.inclusion_counts[j] += t.inclusion_counts[j];
        for (const auto& [k, cnt] : t.k_histogram) merged.k_histogram[k] += cnt;
        if (!merged.mean_fit.empty() && !t.mean_fit.empty()) {
            const double wa = static_cast<double>(merged.kept);
            const double wb = static_cast<double>(t.kept);
            for (std::size_t i = 0; i < merged.mean_fit.size(); ++i)
                merged.mean_fit[i] =
                    (merged.mean_fit[i] * wa + t.mean_fit[i] * wb) / (wa + wb);
        }
        merged.kept += t.kept;
        merged.proposals += t.proposals;
        merged.accepts += t.accepts;
        merged.samples.insert(merged.samples.end(), t.samples.begin(), t.samples.end());
        merged.state_keys.insert(merged.state_keys.end(), t.state_keys.begin(),
                                 t.state_keys.end());
    }
    return merged;
}

}  // namespace spikeforest
