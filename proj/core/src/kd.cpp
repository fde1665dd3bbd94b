#include "spikeforest/kd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace spikeforest {

namespace {

struct PendingNode {
    int node_index;
    std::vector<int> points;
};

}  // namespace

TreePartition build_kd_tree(const Dataset& data, std::span<const int> subset, int rounds) {
    if (subset.empty()) throw std::invalid_argument("build_kd_tree: empty coordinate subset");
    if (rounds < 1) throw std::invalid_argument("build_kd_tree: rounds must be >= 1");
    std::vector<int> axes(subset.begin(), subset.end());
    std::sort(axes.begin(), axes.end());
    for (int a : axes) {
        if (a < 0 || a >= data.p()) throw std::invalid_argument("build_kd_tree: axis out of range");
    }
    const int depth_total = rounds * static_cast<int>(axes.size());
    if (depth_total >= 63 || data.n() < (1LL << depth_total))
        throw std::invalid_argument("build_kd_tree: need n >= 2^(rounds*|subset|) points");

    TreePartition tree;
    std::vector<int> all(data.n());
    for (int i = 0; i < data.n(); ++i) all[i] = i;
    std::vector<PendingNode> level;
    level.push_back(PendingNode{0, std::move(all)});

    for (int depth = 0; depth < depth_total; ++depth) {
        const int axis = axes[depth % axes.size()];
        std::vector<PendingNode> next;
        next.reserve(level.size() * 2);
        for (auto& pn : level) {
            auto& pts = pn.points;
            std::sort(pts.begin(), pts.end(), [&](int a, int b) {
                const double va = data.x(a, axis), vb = data.x(b, axis);
                if (va != vb) return va < vb;
                return a < b;
            });
            const int m = static_cast<int>(pts.size());
            int cut = m / 2;  // lower median goes left
            double tau = data.x(pts[cut - 1], axis);
            // Threshold descent is by value, so on ties back off to the
            // largest value strictly below the node maximum.
            if (tau == data.x(pts[m - 1], axis)) {
                int k = cut - 1;
                while (k >= 0 && data.x(pts[k], axis) == tau) --k;
                if (k < 0)
                    throw std::invalid_argument(
                        "build_kd_tree: node has a single distinct value on axis " +
                        std::to_string(axis + 1));
                tau = data.x(pts[k], axis);
                cut = k + 1;
            } else {
                // Extend the left block over duplicates of tau.
                while (cut < m && data.x(pts[cut], axis) == tau) ++cut;
            }
            tree.grow(pn.node_index, SplitRule{axis, tau});
            const auto& nd = tree.node(pn.node_index);
            PendingNode left{nd.left, {pts.begin(), pts.begin() + cut}};
            PendingNode right{nd.right, {pts.begin() + cut, pts.end()}};
            next.push_back(std::move(left));
            next.push_back(std::move(right));
        }
        level = std::move(next);
    }
    return tree;
}

bool regularity_check(const Dataset& data, std::span<const int> subset, double M, int s_max) {
    if (M <= 0.0) throw std::invalid_argument("regularity_check: M must be positive");
    // All points identical in the subset coordinates: vacuously regular.
    {
        bool any = false;
        for (int i = 1; i < data.n() && !any; ++i)
            for (int j : subset)
                if (data.x(i, j) != data.x(0, j)) {
                    any = true;
                    break;
                }
        if (!any) return true;
    }
    const int q = static_cast<int>(subset.size());
    for (int s = 1; s <= s_max; ++s) {
        if (static_cast<double>(s) * q >= 62) break;
        if (data.n() < (1LL << (s * q))) break;  // level not feasible
        TreePartition kd;
        try {
            kd = build_kd_tree(data, subset, s);
        } catch (const std::invalid_argument&) {
            break;  // ties exhausted the distinct values at this depth
        }
        const auto diams = diameter(kd, data, subset);
        double max_d = 0.0, weighted = 0.0;
        const auto stats = cell_measures(kd, data);
        for (std::size_t k = 0; k < diams.per_cell.size(); ++k) {
            max_d = std::max(max_d, diams.per_cell[k]);
            weighted += stats.measures[k] * diams.per_cell[k];
        }
        if (max_d == 0.0) continue;  // skip all-zero levels
        if (!(max_d < M * weighted)) return false;
    }
    return true;
}

}  // namespace spikeforest
