#include "spikeforest/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace spikeforest {

TreePartition::TreePartition() { nodes_.push_back(TreeNode{}); }

int TreePartition::leaf_count() const {
    int k = 0;
    for (const auto& nd : nodes_)
        if (nd.is_leaf()) ++k;
    return k;
}

std::vector<int> TreePartition::leaves() const {
    std::vector<int> out;
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        if (nodes_[i].is_leaf()) {
            out.push_back(i);
        } else {
            stack.push_back(nodes_[i].right);  // left is popped first
            stack.push_back(nodes_[i].left);
        }
    }
    return out;
}

std::vector<int> TreePartition::internal_nodes() const {
    std::vector<int> out;
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        if (!nodes_[i].is_leaf()) {
            out.push_back(i);
            stack.push_back(nodes_[i].right);
            stack.push_back(nodes_[i].left);
        }
    }
    return out;
}

std::vector<int> TreePartition::leaf_ids() const {
    std::vector<int> ids(nodes_.size(), -1);
    int next = 0;
    for (int i : leaves()) ids[i] = next++;
    return ids;
}

int TreePartition::depth_of(int node_index) const {
    std::function<int(int, int)> walk = [&](int i, int d) -> int {
        if (i == node_index) return d;
        if (nodes_[i].is_leaf()) return -1;
        int l = walk(nodes_[i].left, d + 1);
        if (l >= 0) return l;
        return walk(nodes_[i].right, d + 1);
    };
    int d = walk(0, 0);
    if (d < 0) throw std::invalid_argument("depth_of: node not reachable");
    return d;
}

int TreePartition::max_depth() const {
    std::function<int(int)> walk = [&](int i) -> int {
        if (nodes_[i].is_leaf()) return 0;
        return 1 + std::max(walk(nodes_[i].left), walk(nodes_[i].right));
    };
    return walk(0);
}

bool TreePartition::is_full_symmetric() const {
    const int d = max_depth();
    std::function<bool(int, int)> walk = [&](int i, int depth) -> bool {
        if (nodes_[i].is_leaf()) return depth == d;
        return walk(nodes_[i].left, depth + 1) && walk(nodes_[i].right, depth + 1);
    };
    return walk(0, 0);
}

std::vector<int> TreePartition::axes_used() const {
    std::set<int> s;
    for (const auto& nd : nodes_)
        if (!nd.is_leaf()) s.insert(nd.split.axis);
    return {s.begin(), s.end()};
}

std::vector<int> TreePartition::axis_use_counts(int p) const {
    std::vector<int> counts(p, 0);
    for (const auto& nd : nodes_)
        if (!nd.is_leaf()) ++counts[nd.split.axis];
    return counts;
}

int TreePartition::leaf_of(std::span<const double> x) const {
    const auto ids = leaf_ids();
    int i = 0;
    while (!nodes_[i].is_leaf())
        i = (x[nodes_[i].split.axis] <= nodes_[i].split.threshold) ? nodes_[i].left
                                                                   : nodes_[i].right;
    return ids[i];
}

std::vector<std::vector<int>> TreePartition::assign(const Dataset& data) const {
    const auto ids = leaf_ids();
    std::vector<std::vector<int>> members(leaf_count());
    for (int r = 0; r < data.n(); ++r) {
        int i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& s = nodes_[i].split;
            i = (data.x(r, s.axis) <= s.threshold) ? nodes_[i].left : nodes_[i].right;
        }
        members[ids[i]].push_back(r);
    }
    return members;
}

void TreePartition::grow(int leaf_node_index, SplitRule rule) {
    if (!nodes_[leaf_node_index].is_leaf()) throw std::invalid_argument("grow: not a leaf");
    const int l = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_.push_back(TreeNode{});
    nodes_[leaf_node_index].split = rule;
    nodes_[leaf_node_index].left = l;
    nodes_[leaf_node_index].right = l + 1;
}

void TreePartition::prune(int idx) {
    const TreeNode& nd = nodes_[idx];
    if (nd.is_leaf() || !nodes_[nd.left].is_leaf() || !nodes_[nd.right].is_leaf())
        throw std::invalid_argument("prune: need an internal node with two leaf children");
    nodes_[idx].left = -1;
    nodes_[idx].right = -1;
    compact();
}

void TreePartition::set_rule(int idx, SplitRule rule) {
    if (nodes_[idx].is_leaf()) throw std::invalid_argument("set_rule: leaf node");
    nodes_[idx].split = rule;
}

void TreePartition::compact() {
    // Rebuild the arena keeping only reachable nodes.
    std::vector<TreeNode> fresh;
    std::function<int(int)> copy = [&](int i) -> int {
        const int at = static_cast<int>(fresh.size());
        fresh.push_back(nodes_[i]);
        if (!nodes_[i].is_leaf()) {
            const int l = copy(nodes_[i].left);
            const int r = copy(nodes_[i].right);
            fresh[at].left = l;
            fresh[at].right = r;
        }
        return at;
    };
    copy(0);
    nodes_ = std::move(fresh);
}

double TreePartition::log_sequence_count() const {
    // Number of linear extensions of the internal-node ancestor order:
    // m! / prod_v (internal nodes in subtree of v), m = K-1.
    double log_den = 0.0;
    std::function<int(int)> count = [&](int i) -> int {
        if (nodes_[i].is_leaf()) return 0;
        const int m = 1 + count(nodes_[i].left) + count(nodes_[i].right);
        log_den += std::log(static_cast<double>(m));
        return m;
    };
    const int m = count(0);
    return std::lgamma(m + 1.0) - log_den;
}

namespace {

nlohmann::ordered_json node_to_json(const TreePartition& t, int i) {
    const auto& nd = t.node(i);
    if (nd.is_leaf()) return nlohmann::ordered_json{{"leaf", true}};
    nlohmann::ordered_json j;
    j["axis"] = nd.split.axis + 1;  // 1-based to match x1..xp column names
    j["threshold"] = nd.split.threshold;
    j["left"] = node_to_json(t, nd.left);
    j["right"] = node_to_json(t, nd.right);
    return j;
}

void node_from_json(const nlohmann::json& j, TreePartition& t, int node_index) {
    if (j.contains("leaf")) return;
    SplitRule rule;
    rule.axis = j.at("axis").get<int>() - 1;
    rule.threshold = j.at("threshold").get<double>();
    t.grow(node_index, rule);
    const auto& nd = t.node(node_index);
    const int l = nd.left, r = nd.right;
    node_from_json(j.at("left"), t, l);
    node_from_json(j.at("right"), t, r);
}

}  // namespace

std::string TreePartition::to_json() const { return node_to_json(*this, 0).dump(); }

TreePartition TreePartition::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TreePartition t;
    node_from_json(j, t, 0);
    return t;
}

bool TreePartition::same_structure(const TreePartition& other) const {
    std::function<bool(int, int)> eq = [&](int a, int b) -> bool {
        const bool la = nodes_[a].is_leaf(), lb = other.nodes_[b].is_leaf();
        if (la != lb) return false;
        if (la) return true;
        if (nodes_[a].split.axis != other.nodes_[b].split.axis) return false;
        if (nodes_[a].split.threshold != other.nodes_[b].split.threshold) return false;
        return eq(nodes_[a].left, other.nodes_[b].left) &&
               eq(nodes_[a].right, other.nodes_[b].right);
    };
    return eq(0, 0);
}

CellStats cell_measures(const TreePartition& tree, const Dataset& data) {
    CellStats stats;
    stats.members = tree.assign(data);
    stats.counts.reserve(stats.members.size());
    stats.measures.reserve(stats.members.size());
    for (const auto& m : stats.members) {
        stats.counts.push_back(static_cast<int>(m.size()));
        stats.measures.push_back(static_cast<double>(m.size()) / data.n());
    }
    return stats;
}

bool is_valid_counts(std::span<const int> leaf_counts, int cbar) {
    if (cbar < 1) throw std::invalid_argument("is_valid: cbar must be a positive integer");
    const int need = cbar * cbar;
    for (int c : leaf_counts)
        if (c < need) return false;
    return true;
}

bool is_valid(const TreePartition& tree, const Dataset& data, int cbar) {
    const auto stats = cell_measures(tree, data);
    return is_valid_counts(stats.counts, cbar);
}

DiameterResult diameter(const TreePartition& tree, const Dataset& data,
                        std::span<const int> subset) {
    const auto stats = cell_measures(tree, data);
    DiameterResult res;
    res.per_cell.resize(stats.members.size(), 0.0);
    double acc = 0.0;
    for (std::size_t k = 0; k < stats.members.size(); ++k) {
        const auto& pts = stats.members[k];
        double best2 = 0.0;
        for (std::size_t a = 0; a < pts.size(); ++a) {
            for (std::size_t b = a + 1; b < pts.size(); ++b) {
                double d2 = 0.0;
                for (int j : subset) {
                    const double d = data.x(pts[a], j) - data.x(pts[b], j);
                    d2 += d * d;
                }
                best2 = std::max(best2, d2);
            }
        }
        res.per_cell[k] = std::sqrt(best2);
        acc += stats.measures[k] * best2;
    }
    res.partition = std::sqrt(acc);
    return res;
}

std::vector<double> StepFunction::values(const Dataset& data) const {
    const auto members = partition.assign(data);
    std::vector<double> out(data.n());
    for (std::size_t k = 0; k < members.size(); ++k)
        for (int i : members[k]) out[i] = beta[k];
    return out;
}

StepFunction project_cell_means(const TreePartition& tree, const Dataset& data,
                                std::span<const double> f_values) {
    if (static_cast<int>(f_values.size()) != data.n())
        throw std::invalid_argument("project_cell_means: value vector length differs from n");
    const auto members = tree.assign(data);
    StepFunction sf;
    sf.partition = tree;
    sf.beta.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        if (members[k].empty())
            throw std::invalid_argument("project_cell_means: empty leaf");
        double s = 0.0;
        for (int i : members[k]) s += f_values[i];
        sf.beta[k] = s / static_cast<double>(members[k].size());
    }
    return sf;
}

std::vector<std::vector<int>> partition_signature(const TreePartition& tree,
                                                  const Dataset& data) {
    auto groups = tree.assign(data);
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) {
                  if (a.empty() || b.empty()) return a.size() < b.size();
                  return a.front() < b.front();
              });
    return groups;
}

std::string partition_key(const TreePartition& tree, const Dataset& data) {
    const auto sig = partition_signature(tree, data);
    std::ostringstream out;
    for (const auto& g : sig) {
        for (int i : g) out << i << ',';
        out << '|';
    }
    return out.str();
}

}  // namespace spikeforest
