#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spikeforest/rng.hpp"
#include "spikeforest/tree.hpp"

namespace spikeforest {

// Ordered forest of tree partitions with per-tree step heights. The fit at x
// is the sum over trees of the step of the leaf containing x.
struct Ensemble {
    std::vector<TreePartition> trees;
    std::vector<std::vector<double>> betas;  // betas[t] has K^t entries

    int tree_count() const { return static_cast<int>(trees.size()); }
    int total_leaves() const;
    double mean_leaves() const;  // K-bar
    double eval(std::span<const double> x) const;
    std::vector<double> values(const Dataset& data) const;
    bool valid(const Dataset& data, int cbar) const;
};

// Partition induced by overlaying the cuts of all trees; cells are sets of
// data-point indices, indexed in order of first appearance in the data. The
// provenance of a cell is the T-tuple of local leaf ids it intersects.
struct GlobalPartition {
    std::vector<std::vector<int>> cells;
    std::vector<std::vector<int>> provenance;

    int cell_count() const { return static_cast<int>(cells.size()); }
};

GlobalPartition global_partition(const Ensemble& ens, const Dataset& data);

// Binary incidence of global cells (rows) against local leaves (columns,
// blocked tree by tree). Stored sparsely as the T column indices of each row.
struct StretchingMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> col_offset;        // column offset of each tree block
    std::vector<std::vector<int>> row_cols;  // sorted columns with a 1, per row
    Eigen::MatrixXd gram;               // A' * A, (T*Kbar) x (T*Kbar)

    Eigen::MatrixXd dense() const;
    long long entry(int i, int j) const;  // 0/1
};

StretchingMatrix stretching_matrix(const Ensemble& ens, const Dataset& data);
StretchingMatrix stretching_matrix(const Ensemble& ens, const GlobalPartition& gp);

// Aggregated step sizes: beta_bar = A(E) * B.
std::vector<double> aggregate_steps(const Ensemble& ens, const Dataset& data);

struct SpectralDiagnostics {
    double lambda_min = 0.0;  // smallest nonzero singular value of A
    double lambda_max = 0.0;
    double condition = 0.0;   // lambda_max / lambda_min
};

// Square roots of the extremal nonzero eigenvalues of the Gram matrix.
// "Nonzero" means above 1e-10 times the largest eigenvalue.
SpectralDiagnostics spectral_diagnostics(const StretchingMatrix& sm);

// Splits a full symmetric k-d tree with K-hat = 2^D leaves into T = K-hat/2
// completely imbalanced trees with D+1 leaves each whose merged cuts
// reproduce the input exactly. Step heights are left at zero.
Ensemble decompose_kd_into_weak_learners(const TreePartition& kd);

// Column permutation placing, for each global cell, the deepest local leaf
// containing it first, so that the permuted stretching matrix starts with an
// identity block. Throws if the matching is not a bijection.
std::vector<int> identity_block_permutation(const Ensemble& ens, const Dataset& data,
                                            const GlobalPartition& gp,
                                            const StretchingMatrix& sm);

// Minimum-norm least-squares solve of A * B = beta_bar.
std::vector<double> solve_steps_for_target(const Ensemble& ens, const Dataset& data,
                                           std::span<const double> target);

// The worked two-tree example: seven points in the unit square and two
// three-leaf trees whose global partition has seven cells.
struct WorkedExample {
    Dataset data;
    Ensemble ensemble;
    std::vector<std::vector<long long>> expected_a;     // 7 x 6
    std::vector<std::vector<long long>> expected_gram;  // 6 x 6
};

WorkedExample worked_two_tree_example();

// Random valid ensemble for randomized checks: T trees grown by accepted
// random splits, every leaf keeping at least cbar^2 points.
Ensemble make_random_valid_ensemble(const Dataset& data, int T, int max_leaves, int cbar,
                                    Rng& rng);

}  // namespace spikeforest
