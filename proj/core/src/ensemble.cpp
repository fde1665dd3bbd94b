#include "spikeforest/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace spikeforest {

int Ensemble::total_leaves() const {
    int s = 0;
    for (const auto& t : trees) s += t.leaf_count();
    return s;
}

double Ensemble::mean_leaves() const {
    if (trees.empty()) return 0.0;
    return static_cast<double>(total_leaves()) / static_cast<double>(trees.size());
}

double Ensemble::eval(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < trees.size(); ++t) s += betas[t][trees[t].leaf_of(x)];
    return s;
}

std::vector<double> Ensemble::values(const Dataset& data) const {
    std::vector<double> out(data.n(), 0.0);
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const auto members = trees[t].assign(data);
        for (std::size_t k = 0; k < members.size(); ++k)
            for (int i : members[k]) out[i] += betas[t][k];
    }
    return out;
}

bool Ensemble::valid(const Dataset& data, int cbar) const {
    for (const auto& t : trees)
        if (!is_valid(t, data, cbar)) return false;
    return true;
}

GlobalPartition global_partition(const Ensemble& ens, const Dataset& data) {
    const int T = ens.tree_count();
    std::vector<std::vector<int>> point_tuple(data.n(), std::vector<int>(T));
    for (int t = 0; t < T; ++t) {
        const auto members = ens.trees[t].assign(data);
        for (std::size_t k = 0; k < members.size(); ++k)
            for (int i : members[k]) point_tuple[i][t] = static_cast<int>(k);
    }
    GlobalPartition gp;
    std::map<std::vector<int>, int> seen;
    for (int i = 0; i < data.n(); ++i) {
        auto it = seen.find(point_tuple[i]);
        if (it == seen.end()) {
            const int id = gp.cell_count();
            seen.emplace(point_tuple[i], id);
            gp.cells.push_back({i});
            gp.provenance.push_back(point_tuple[i]);
        } else {
            gp.cells[it->second].push_back(i);
        }
    }
    return gp;
}

Eigen::MatrixXd StretchingMatrix::dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j : row_cols[i]) a(i, j) = 1.0;
    return a;
}

long long StretchingMatrix::entry(int i, int j) const {
    return std::binary_search(row_cols[i].begin(), row_cols[i].end(), j) ? 1 : 0;
}

StretchingMatrix stretching_matrix(const Ensemble& ens, const GlobalPartition& gp) {
    StretchingMatrix sm;
    const int T = ens.tree_count();
    sm.col_offset.resize(T, 0);
    int cols = 0;
    for (int t = 0; t < T; ++t) {
        sm.col_offset[t] = cols;
        cols += ens.trees[t].leaf_count();
    }
    sm.rows = gp.cell_count();
    sm.cols = cols;
    sm.row_cols.resize(sm.rows);
    for (int i = 0; i < sm.rows; ++i) {
        auto& rc = sm.row_cols[i];
        rc.reserve(T);
        for (int t = 0; t < T; ++t) rc.push_back(sm.col_offset[t] + gp.provenance[i][t]);
    }
    sm.gram = Eigen::MatrixXd::Zero(cols, cols);
    for (int i = 0; i < sm.rows; ++i)
        for (int a : sm.row_cols[i])
            for (int b : sm.row_cols[i]) sm.gram(a, b) += 1.0;
    return sm;
}

StretchingMatrix stretching_matrix(const Ensemble& ens, const Dataset& data) {
    return stretching_matrix(ens, global_partition(ens, data));
}

std::vector<double> aggregate_steps(const Ensemble& ens, const Dataset& data) {
    const auto gp = global_partition(ens, data);
    std::vector<double> bar(gp.cell_count(), 0.0);
    for (int i = 0; i < gp.cell_count(); ++i)
        for (int t = 0; t < ens.tree_count(); ++t) bar[i] += ens.betas[t][gp.provenance[i][t]];
    return bar;
}

SpectralDiagnostics spectral_diagnostics(const StretchingMatrix& sm) {
    if (sm.rows == 0 || sm.cols == 0)
        throw std::invalid_argument("spectral_diagnostics: empty matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sm.gram);
    const auto& ev = solver.eigenvalues();
    const double top = ev(ev.size() - 1);
    if (top <= 0.0) throw std::invalid_argument("spectral_diagnostics: all-zero matrix");
    double bottom = top;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) > 1e-10 * top) {
            bottom = ev(i);
            break;
        }
    }
    SpectralDiagnostics d;
    d.lambda_max = std::sqrt(top);
    d.lambda_min = std::sqrt(bottom);
    d.condition = d.lambda_max / d.lambda_min;
    return d;
}

Ensemble decompose_kd_into_weak_learners(const TreePartition& kd) {
    if (!kd.is_full_symmetric() || kd.max_depth() < 1)
        throw std::invalid_argument(
            "decompose_kd_into_weak_learners: input must be a full symmetric tree");
    const int depth = kd.max_depth();

    // Nodes at depth-1 . . . in left-to-right order.
    std::vector<int> frontier = {0};
    for (int d = 0; d < depth - 1; ++d) {
        std::vector<int> next;
        for (int i : frontier) {
            next.push_back(kd.node(i).left);
            next.push_back(kd.node(i).right);
        }
        frontier = std::move(next);
    }

    Ensemble ens;
    for (int target : frontier) {
        // Path of (node, go_right) choices from the root to the target.
        std::vector<std::pair<int, bool>> path;
        std::function<bool(int)> find = [&](int i) -> bool {
            if (i == target) return true;
            if (kd.node(i).is_leaf()) return false;
            if (find(kd.node(i).left)) {
                path.push_back({i, false});
                return true;
            }
            if (find(kd.node(i).right)) {
                path.push_back({i, true});
                return true;
            }
            return false;
        };
        find(0);
        std::reverse(path.begin(), path.end());

        TreePartition weak;
        int cur = 0;
        for (const auto& [node, go_right] : path) {
            weak.grow(cur, kd.node(node).split);
            cur = go_right ? weak.node(cur).right : weak.node(cur).left;
        }
        weak.grow(cur, kd.node(target).split);
        ens.trees.push_back(std::move(weak));
        ens.betas.emplace_back(depth + 1, 0.0);
    }
    return ens;
}

std::vector<int> identity_block_permutation(const Ensemble& ens, const Dataset& data,
                                            const GlobalPartition& gp,
                                            const StretchingMatrix& sm) {
    (void)data;
    // Depth of each local leaf, per tree, in canonical leaf order.
    std::vector<std::vector<int>> leaf_depths(ens.tree_count());
    for (int t = 0; t < ens.tree_count(); ++t) {
        const auto& tree = ens.trees[t];
        const auto ids = tree.leaf_ids();
        leaf_depths[t].resize(tree.leaf_count());
        for (int node = 0; node < tree.node_count(); ++node)
            if (ids[node] >= 0) leaf_depths[t][ids[node]] = tree.depth_of(node);
    }
    std::vector<int> perm;
    std::vector<bool> used(sm.cols, false);
    for (int i = 0; i < gp.cell_count(); ++i) {
        int best_tree = -1, best_depth = -1;
        for (int t = 0; t < ens.tree_count(); ++t) {
            const int leaf = gp.provenance[i][t];
            if (leaf_depths[t][leaf] > best_depth) {
                best_depth = leaf_depths[t][leaf];
                best_tree = t;
            }
        }
        const int col = sm.col_offset[best_tree] + gp.provenance[i][best_tree];
        if (used[col])
            throw std::runtime_error(
                "identity_block_permutation: deepest-leaf matching is not a bijection");
        used[col] = true;
        perm.push_back(col);
    }
    for (int j = 0; j < sm.cols; ++j)
        if (!used[j]) perm.push_back(j);
    return perm;
}

std::vector<double> solve_steps_for_target(const Ensemble& ens, const Dataset& data,
                                           std::span<const double> target) {
    const auto gp = global_partition(ens, data);
    if (static_cast<int>(target.size()) != gp.cell_count())
        throw std::invalid_argument("solve_steps_for_target: target length must equal K(E)");
    const auto sm = stretching_matrix(ens, gp);
    Eigen::MatrixXd a = sm.dense();
    Eigen::VectorXd b(sm.rows);
    for (int i = 0; i < sm.rows; ++i) b(i) = target[i];
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    Eigen::VectorXd sol = cod.solve(b);
    return {sol.data(), sol.data() + sol.size()};
}

WorkedExample worked_two_tree_example() {
    // Two three-leaf trees over seven points: the first splits x1 at 0.5 and
    // the upper branch again at x2 = 0.5; the second stacks three horizontal
    // bands with cuts at x2 = 0.3 and 0.7. Overlaying the cuts yields seven
    // occupied global cells.
    const std::vector<std::pair<double, double>> pts = {
        {0.8, 0.3}, {0.5, 0.2}, {0.9, 0.5}, {0.2, 0.6},
        {0.3, 0.9}, {0.7, 0.7}, {0.6, 0.8},
    };
    std::vector<double> x;
    for (auto [a, b] : pts) {
        x.push_back(a);
        x.push_back(b);
    }
    std::vector<double> y(pts.size(), 0.0);
    Dataset data(std::move(x), std::move(y), static_cast<int>(pts.size()), 2);

    TreePartition t1;
    t1.grow(0, SplitRule{0, 0.5});
    t1.grow(t1.node(0).right, SplitRule{1, 0.5});
    TreePartition t2;
    t2.grow(0, SplitRule{1, 0.3});
    t2.grow(t2.node(0).right, SplitRule{1, 0.7});

    Ensemble ens;
    ens.trees = {std::move(t1), std::move(t2)};
    ens.betas = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};

    WorkedExample ex{std::move(data), std::move(ens), {}, {}};
    ex.expected_a = {
        {0, 1, 0, 1, 0, 0}, {1, 0, 0, 1, 0, 0}, {0, 1, 0, 0, 1, 0}, {1, 0, 0, 0, 1, 0},
        {1, 0, 0, 0, 0, 1}, {0, 0, 1, 0, 1, 0}, {0, 0, 1, 0, 0, 1},
    };
    ex.expected_gram = {
        {3, 0, 0, 1, 1, 1}, {0, 2, 0, 1, 1, 0}, {0, 0, 2, 0, 1, 1},
        {1, 1, 0, 2, 0, 0}, {1, 1, 1, 0, 3, 0}, {1, 0, 1, 0, 0, 2},
    };
    return ex;
}

Ensemble make_random_valid_ensemble(const Dataset& data, int T, int max_leaves, int cbar,
                                    Rng& rng) {
    Ensemble ens;
    const int need = cbar * cbar;
    for (int t = 0; t < T; ++t) {
        TreePartition tree;
        const int want = 1 + static_cast<int>(rng.uniform_int(max_leaves));
        int attempts = 0;
        while (tree.leaf_count() < want && attempts < 200) {
            ++attempts;
            TreePartition cand = tree;
            const auto leaves = cand.leaves();
            const int leaf = leaves[rng.uniform_int(leaves.size())];
            const int axis = static_cast<int>(rng.uniform_int(data.p()));
            const int row = static_cast<int>(rng.uniform_int(data.n()));
            cand.grow(leaf, SplitRule{axis, data.x(row, axis)});
            const auto stats = cell_measures(cand, data);
            bool ok = true;
            for (int c : stats.counts)
                if (c < need) ok = false;
            if (ok) tree = std::move(cand);
        }
        ens.betas.emplace_back(tree.leaf_count(), 0.0);
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

}  // namespace spikeforest
