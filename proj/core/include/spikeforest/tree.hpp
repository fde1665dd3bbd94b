#pragma once

#include <span>
#include <string>
#include <vector>

#include "spikeforest/dataset.hpp"

namespace spikeforest {

// Axis-parallel split at an observed covariate value. Points with
// x[axis] <= threshold go to the left child.
struct SplitRule {
    int axis = 0;  // 0-based coordinate
    double threshold = 0.0;
};

struct TreeNode {
    SplitRule split;
    int left = -1;
    int right = -1;
    bool is_leaf() const { return left < 0; }
};

// Binary tree partition. Node 0 is the root; nodes are stored in an arena
// whose order carries no meaning. Leaf identities, where they matter, are
// assigned by preorder traversal (left subtree first). Instances are value
// types: proposals copy, mutate, and swap.
class TreePartition {
  public:
    TreePartition();  // single leaf

    static TreePartition single_leaf() { return TreePartition(); }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int leaf_count() const;
    int internal_count() const { return node_count() - leaf_count(); }
    const TreeNode& node(int i) const { return nodes_[i]; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    // Node indices of the leaves in canonical (preorder) order.
    std::vector<int> leaves() const;
    std::vector<int> internal_nodes() const;
    // node index -> canonical leaf id, -1 for internal nodes
    std::vector<int> leaf_ids() const;
    int depth_of(int node_index) const;
    int max_depth() const;
    bool is_full_symmetric() const;

    // Sorted list of axes split on, and per-axis split counts (size p_hint).
    std::vector<int> axes_used() const;
    std::vector<int> axis_use_counts(int p) const;

    // Canonical leaf id of the cell containing x, by root-to-leaf descent.
    int leaf_of(std::span<const double> x) const;

    // Per-leaf point index lists in canonical leaf order.
    std::vector<std::vector<int>> assign(const Dataset& data) const;

    // In-place structural edits used by proposals and builders.
    // grow returns the arena index of the node that was split.
    void grow(int leaf_node_index, SplitRule rule);
    void prune(int internal_node_index);  // both children must be leaves
    void set_rule(int internal_node_index, SplitRule rule);

    // log of the number of ordered split sequences producing this tree:
    // (K-1)! divided by the product of internal-subtree sizes.
    double log_sequence_count() const;

    std::string to_json() const;
    static TreePartition from_json(const std::string& text);

    bool same_structure(const TreePartition& other) const;

  private:
    void compact();
    std::vector<TreeNode> nodes_;
};

struct CellStats {
    std::vector<int> counts;                // n_k per canonical leaf
    std::vector<double> measures;           // mu(Omega_k) = n_k / n
    std::vector<std::vector<int>> members;  // point indices per leaf
};

CellStats cell_measures(const TreePartition& tree, const Dataset& data);

// Validity per the minimal cell-mass rule mu(Omega_k) >= cbar^2 / n,
// i.e. every leaf holds at least cbar^2 points.
bool is_valid(const TreePartition& tree, const Dataset& data, int cbar);
bool is_valid_counts(std::span<const int> leaf_counts, int cbar);

struct DiameterResult {
    std::vector<double> per_cell;  // max pairwise ||x_S - y_S||_2 within the cell
    double partition = 0.0;        // sqrt(sum_k mu_k * diam_k^2)
};

DiameterResult diameter(const TreePartition& tree, const Dataset& data,
                        std::span<const int> subset);

// Piecewise-constant function supported on a tree partition.
struct StepFunction {
    TreePartition partition;
    std::vector<double> beta;  // one height per canonical leaf

    double eval(std::span<const double> x) const { return beta[partition.leaf_of(x)]; }
    std::vector<double> values(const Dataset& data) const;
};

// L2(P_n)-projection of f onto step functions over the tree: cell means.
StepFunction project_cell_means(const TreePartition& tree, const Dataset& data,
                                std::span<const double> f_values);

// Canonical signature of the induced grouping of data indices: groups sorted
// by smallest member. Two trees are "the same partition" iff signatures match.
std::vector<std::vector<int>> partition_signature(const TreePartition& tree, const Dataset& data);
std::string partition_key(const TreePartition& tree, const Dataset& data);

}  // namespace spikeforest
