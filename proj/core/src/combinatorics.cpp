#include "spikeforest/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "spikeforest/stats.hpp"

namespace spikeforest {

BigInt partitioning_number(int n, int q, int K) {
    if (K < 1 || K > n) throw std::invalid_argument("partitioning_number: need 1 <= K <= n");
    if (q < 0) throw std::invalid_argument("partitioning_number: q must be nonnegative");
    BigInt result = 1;
    for (int i = 0; i < K - 1; ++i) result *= q;
    for (int m = n - K + 2; m <= n; ++m) result *= m;
    return result;
}

double log_partitioning_number(int n, int q, int K) {
    if (K < 1 || K > n) throw std::invalid_argument("log_partitioning_number: need 1 <= K <= n");
    if (K == 1) return 0.0;
    if (q == 0) return -std::numeric_limits<double>::infinity();
    return (K - 1) * std::log(static_cast<double>(q)) + std::lgamma(n + 1.0) -
           std::lgamma(n - K + 2.0);
}

namespace {

// Recursive enumeration of tree objects over a point set. Each object is
// produced exactly once: a root rule plus every (left, right) combination.
struct Enumerator {
    const Dataset& data;
    std::vector<int> axes;
    int cbar2;

    std::vector<TreePartition> results;
    std::vector<int> required_axes;

    void run(int K) {
        std::vector<int> all(data.n());
        for (int i = 0; i < data.n(); ++i) all[i] = i;
        for (auto& t : build(all, K)) {
            const auto used = t.axes_used();
            if (used == required_axes) results.push_back(std::move(t));
        }
    }

    std::vector<TreePartition> build(const std::vector<int>& points, int K) {
        std::vector<TreePartition> out;
        if (static_cast<int>(points.size()) < K * cbar2) return out;
        if (K == 1) {
            out.emplace_back();
            return out;
        }
        for (int axis : axes) {
            // Distinct in-node values; splitting at the max leaves the right
            // child empty, so it is excluded.
            std::set<double> values;
            for (int i : points) values.insert(data.x(i, axis));
            if (values.size() < 2) continue;
            auto last = std::prev(values.end());
            for (auto it = values.begin(); it != last; ++it) {
                const double tau = *it;
                std::vector<int> left, right;
                for (int i : points)
                    (data.x(i, axis) <= tau ? left : right).push_back(i);
                for (int kl = 1; kl < K; ++kl) {
                    const int kr = K - kl;
                    auto lefts = build(left, kl);
                    if (lefts.empty()) continue;
                    auto rights = build(right, kr);
                    for (const auto& lt : lefts) {
                        for (const auto& rt : rights) {
                            TreePartition t;
                            t.grow(0, SplitRule{axis, tau});
                            graft(t, t.node(0).left, lt);
                            graft(t, t.node(0).right, rt);
                            out.push_back(std::move(t));
                        }
                    }
                }
            }
        }
        return out;
    }

    static void graft(TreePartition& host, int at, const TreePartition& sub) {
        std::function<void(int, int)> walk = [&](int host_node, int sub_node) {
            if (sub.node(sub_node).is_leaf()) return;
            host.grow(host_node, sub.node(sub_node).split);
            const int l = host.node(host_node).left;
            const int r = host.node(host_node).right;
            walk(l, sub.node(sub_node).left);
            walk(r, sub.node(sub_node).right);
        };
        walk(at, 0);
    }
};

}  // namespace

std::vector<TreePartition> enumerate_valid_tree_objects(const Dataset& data,
                                                        std::span<const int> subset, int K,
                                                        int cbar, long long sequence_cap) {
    if (K < 1 || K > data.n())
        throw std::invalid_argument("enumerate_valid_tree_objects: need 1 <= K <= n");
    const BigInt guard = partitioning_number(data.n(), static_cast<int>(subset.size()), K);
    if (guard > sequence_cap)
        throw std::invalid_argument(
            "enumerate_valid_tree_objects: split-sequence count exceeds the configured cap");
    Enumerator en{data, {subset.begin(), subset.end()}, cbar * cbar, {}, {}};
    std::sort(en.axes.begin(), en.axes.end());
    en.required_axes = en.axes;
    if (K == 1) {
        if (subset.empty()) return {TreePartition::single_leaf()};
        return {};
    }
    en.run(K);
    return en.results;
}

std::vector<EnumeratedPartition> enumerate_valid_trees(const Dataset& data,
                                                       std::span<const int> subset, int K,
                                                       int cbar, long long sequence_cap) {
    auto objects = enumerate_valid_tree_objects(data, subset, K, cbar, sequence_cap);
    std::map<std::string, EnumeratedPartition> grouped;
    std::map<std::string, std::vector<double>> log_exts;
    for (auto& t : objects) {
        const auto key = partition_key(t, data);
        auto it = grouped.find(key);
        if (it == grouped.end()) {
            EnumeratedPartition ep;
            ep.signature = partition_signature(t, data);
            ep.representative = std::move(t);
            ep.object_count = 1;
            grouped.emplace(key, std::move(ep));
            log_exts[key].push_back(grouped.at(key).representative.log_sequence_count());
        } else {
            it->second.object_count += 1;
            log_exts[key].push_back(t.log_sequence_count());
        }
    }
    std::vector<EnumeratedPartition> out;
    out.reserve(grouped.size());
    for (auto& [key, ep] : grouped) {
        ep.log_sequence_multiplicity = log_sum_exp(log_exts.at(key));
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace spikeforest
