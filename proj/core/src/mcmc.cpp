#include "spikeforest/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "spikeforest/combinatorics.hpp"
#include "spikeforest/marginal.hpp"
#include "spikeforest/stats.hpp"

namespace spikeforest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double safe_log(double x) { return std::log(x); }

// ---------------------------------------------------------------- helpers

std::vector<std::pair<int, bool>> path_to_node(const TreePartition& tree, int target) {
    std::vector<std::pair<int, bool>> path;
    std::function<bool(int)> find = [&](int i) -> bool {
        if (i == target) return true;
        if (tree.node(i).is_leaf()) return false;
        if (find(tree.node(i).left)) {
            path.push_back({i, false});
            return true;
        }
        if (find(tree.node(i).right)) {
            path.push_back({i, true});
            return true;
        }
        return false;
    };
    if (!find(0)) throw std::logic_error("path_to_node: unreachable node");
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<int> points_reaching(const TreePartition& tree, const Dataset& data, int target) {
    const auto path = path_to_node(tree, target);
    std::vector<int> pts(data.n());
    for (int i = 0; i < data.n(); ++i) pts[i] = i;
    for (const auto& [node, went_right] : path) {
        const auto& rule = tree.node(node).split;
        std::vector<int> next;
        next.reserve(pts.size());
        for (int i : pts) {
            const bool right = data.x(i, rule.axis) > rule.threshold;
            if (right == went_right) next.push_back(i);
        }
        pts = std::move(next);
    }
    return pts;
}

int count_value(const Dataset& data, std::span<const int> pts, int axis, double tau) {
    int c = 0;
    for (int i : pts)
        if (data.x(i, axis) == tau) ++c;
    return c;
}

// Internal nodes with two leaf children whose axis is used elsewhere too
// (pruning them keeps the active set).
std::vector<int> prunable_keep_axis(const TreePartition& tree, int p) {
    const auto counts = tree.axis_use_counts(p);
    std::vector<int> out;
    for (int i = 0; i < tree.node_count(); ++i) {
        const auto& nd = tree.node(i);
        if (nd.is_leaf()) continue;
        if (!tree.node(nd.left).is_leaf() || !tree.node(nd.right).is_leaf()) continue;
        if (counts[nd.split.axis] >= 2) out.push_back(i);
    }
    return out;
}

// Internal nodes holding the only split on their axis and with two leaf
// children (pruning them drops the axis from the active set).
std::vector<int> removable_axis_nodes(const TreePartition& tree, int p) {
    const auto counts = tree.axis_use_counts(p);
    std::vector<int> out;
    for (int i = 0; i < tree.node_count(); ++i) {
        const auto& nd = tree.node(i);
        if (nd.is_leaf()) continue;
        if (!tree.node(nd.left).is_leaf() || !tree.node(nd.right).is_leaf()) continue;
        if (counts[nd.split.axis] == 1) out.push_back(i);
    }
    return out;
}

// Internal nodes holding the only split on their axis, children arbitrary.
std::vector<int> single_use_axis_nodes(const TreePartition& tree, int p) {
    const auto counts = tree.axis_use_counts(p);
    std::vector<int> out;
    for (int i = 0; i < tree.node_count(); ++i) {
        const auto& nd = tree.node(i);
        if (!nd.is_leaf() && counts[nd.split.axis] == 1) out.push_back(i);
    }
    return out;
}

double ml_from_members(const std::vector<std::vector<int>>& members,
                       std::span<const double> residuals, double v) {
    double total = 0.0;
    for (const auto& cell : members) {
        double s = 0.0, q = 0.0;
        for (int i : cell) {
            s += residuals[i];
            q += residuals[i] * residuals[i];
        }
        total += cell_log_marginal(static_cast<int>(cell.size()), s, q, v);
    }
    return total;
}

bool members_valid(const std::vector<std::vector<int>>& members, int cbar) {
    const std::size_t need = static_cast<std::size_t>(cbar) * cbar;
    for (const auto& m : members)
        if (m.size() < need) return false;
    return true;
}

// Every internal node's threshold must equal an observed value of a point
// reaching that node, or no split sequence can produce the tree. Moves that
// reshuffle points below a node (change, swap, variable relabeling) can break
// this for descendants and must reject such candidates.
bool thresholds_in_node(const TreePartition& tree, const Dataset& data) {
    std::vector<int> all(data.n());
    for (int i = 0; i < data.n(); ++i) all[i] = i;
    std::function<bool(int, const std::vector<int>&)> walk =
        [&](int node, const std::vector<int>& pts) -> bool {
        const auto& nd = tree.node(node);
        if (nd.is_leaf()) return true;
        bool seen = false;
        std::vector<int> left, right;
        for (int i : pts) {
            const double v = data.x(i, nd.split.axis);
            if (v == nd.split.threshold) seen = true;
            (v <= nd.split.threshold ? left : right).push_back(i);
        }
        if (!seen) return false;
        return walk(nd.left, left) && walk(nd.right, right);
    };
    return walk(0, all);
}

// Shared normalizer tables so acceptance ratios stay O(1).
struct PriorTables {
    const PriorConfig* cfg;
    int n = 0, p = 0, K_cap = 0;
    std::vector<double> log_pi_q;            // normalized, index q
    std::vector<double> log_norm_k_by_T;     // index T, lazily filled
    double log_norm_T = 0.0;

    PriorTables(const PriorConfig& c, const Dataset& data) : cfg(&c) {
        n = data.n();
        p = data.p();
        K_cap = c.effective_K_max(n);
        const double L = std::log(c.c) + c.a * std::log(static_cast<double>(p));
        std::vector<double> lw(p + 1);
        for (int j = 0; j <= p; ++j) lw[j] = -j * L;
        const double norm = log_sum_exp(lw);
        log_pi_q.resize(p + 1);
        for (int j = 0; j <= p; ++j) log_pi_q[j] = lw[j] - norm;
        const int T_max = c.effective_T_max(n);
        const double r = std::exp(-c.C_T);
        log_norm_T = -c.C_T + std::log1p(-std::pow(r, T_max)) - std::log1p(-r);
    }

    double norm_k(int T) {
        if (static_cast<int>(log_norm_k_by_T.size()) <= T)
            log_norm_k_by_T.resize(T + 1, std::numeric_limits<double>::quiet_NaN());
        if (std::isnan(log_norm_k_by_T[T])) {
            const double rate = cfg->lambda / T;
            std::vector<double> terms(K_cap);
            const double lr = std::log(rate);
            for (int k = 1; k <= K_cap; ++k) terms[k - 1] = k * lr - std::lgamma(k + 1.0);
            log_norm_k_by_T[T] = log_sum_exp(terms);
        }
        return log_norm_k_by_T[T];
    }

    double log_pi_K(int K, int T) {
        if (K < 1 || K > K_cap) return kNegInf;
        return K * std::log(cfg->lambda / T) - std::lgamma(K + 1.0) - norm_k(T);
    }

    double log_pi_T(int T) const {
        if (T < 1 || T > cfg->effective_T_max(n)) return kNegInf;
        return -cfg->C_T * T - log_norm_T;
    }

    double log_subset(int q) const { return -log_choose(p, q); }
};

// Per-tree prior terms entering acceptance ratios. The last two summands
// implement the uniform-over-split-sequences measure: -log Delta plus the
// log count of sequences producing this particular tree object.
double tree_log_structure(const TreePartition& tree, int q, PriorTables& tab, int T,
                          bool include_subset_terms) {
    const int K = tree.leaf_count();
    double s = tab.log_pi_K(K, T);
    if (include_subset_terms) s += tab.log_pi_q[q] + tab.log_subset(q);
    s += -log_partitioning_number(tab.n, q, K) + tree.log_sequence_count();
    return s;
}

// ---------------------------------------------------------------- proposals

struct TreeState {
    TreePartition tree;
    std::vector<int> subset;  // always equals tree.axes_used()
    std::vector<std::vector<int>> members;
};

struct Proposal {
    TreePartition tree;
    std::vector<int> subset;
    std::vector<std::vector<int>> members;
    double log_q_fwd = 0.0;
    double log_q_rev = 0.0;
};

struct KernelProbs {
    double grow = 0.0, prune = 0.0, change = 0.0, swap = 0.0;
    double var_add = 0.0, var_remove = 0.0, var_swap = 0.0;
    double total() const { return grow + prune + change + swap + var_add + var_remove + var_swap; }
};

enum class MoveKind { Grow, Prune, Change, Swap, VarAdd, VarRemove, VarSwap, None };

MoveKind draw_move(const KernelProbs& kp, Rng& rng) {
    if (kp.total() <= 0.0) return MoveKind::None;
    const double u = rng.uniform() * kp.total();
    double acc = kp.grow;
    if (u < acc) return MoveKind::Grow;
    acc += kp.prune;
    if (u < acc) return MoveKind::Prune;
    acc += kp.change;
    if (u < acc) return MoveKind::Change;
    acc += kp.swap;
    if (u < acc) return MoveKind::Swap;
    acc += kp.var_add;
    if (u < acc) return MoveKind::VarAdd;
    acc += kp.var_remove;
    if (u < acc) return MoveKind::VarRemove;
    return MoveKind::VarSwap;
}

struct KernelOptions {
    int K_cap = 0;
    int cbar = 1;
    bool allow_var_moves = true;
};

std::optional<Proposal> propose_grow_common(const TreeState& st, const Dataset& data,
                                            const KernelOptions& opt, Rng& rng, int axis,
                                            double p_self_extra_log, double p_prune_or_vr,
                                            bool removing_pairs_with_var_remove) {
    const int K = static_cast<int>(st.members.size());
    if (K + 1 > opt.K_cap) return std::nullopt;
    const auto leaves = st.tree.leaves();
    const int li = static_cast<int>(rng.uniform_int(K));
    const auto& pts = st.members[li];
    const int pt = pts[rng.uniform_int(pts.size())];
    const double tau = data.x(pt, axis);

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.grow(leaves[li], SplitRule{axis, tau});
    prop.members = prop.tree.assign(data);
    if (!members_valid(prop.members, opt.cbar)) return std::nullopt;

    const int cnt = count_value(data, pts, axis, tau);
    prop.log_q_fwd = p_self_extra_log - safe_log(K) + safe_log(cnt) - safe_log(pts.size());
    const int reverse_candidates =
        removing_pairs_with_var_remove
            ? static_cast<int>(removable_axis_nodes(prop.tree, data.p()).size())
            : static_cast<int>(prunable_keep_axis(prop.tree, data.p()).size());
    prop.log_q_rev = safe_log(p_prune_or_vr) - safe_log(reverse_candidates);
    return prop;
}

std::optional<Proposal> propose_grow(const TreeState& st, const Dataset& data,
                                     const KernelProbs& kp, const KernelOptions& opt, Rng& rng) {
    if (st.subset.empty()) return std::nullopt;
    const int axis = st.subset[rng.uniform_int(st.subset.size())];
    auto prop = propose_grow_common(st, data, opt, rng, axis,
                                    safe_log(kp.grow) - safe_log(st.subset.size()), kp.prune,
                                    false);
    if (prop) prop->subset = st.subset;
    return prop;
}

std::optional<Proposal> propose_prune(const TreeState& st, const Dataset& data,
                                      const KernelProbs& kp, const KernelOptions& opt,
                                      Rng& rng) {
    (void)opt;
    const auto cands = prunable_keep_axis(st.tree, data.p());
    if (cands.empty()) return std::nullopt;
    const int node = cands[rng.uniform_int(cands.size())];
    const auto rule = st.tree.node(node).split;
    const auto merged = points_reaching(st.tree, data, node);

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.prune(node);
    prop.subset = st.subset;
    prop.members = prop.tree.assign(data);

    const int cnt = count_value(data, merged, rule.axis, rule.threshold);
    prop.log_q_fwd = safe_log(kp.prune) - safe_log(cands.size());
    prop.log_q_rev = safe_log(kp.grow) - safe_log(prop.members.size()) -
                     safe_log(st.subset.size()) + safe_log(cnt) - safe_log(merged.size());
    return prop;
}

std::optional<Proposal> propose_change(const TreeState& st, const Dataset& data,
                                       const KernelProbs& kp, const KernelOptions& opt,
                                       Rng& rng) {
    const auto internals = st.tree.internal_nodes();
    if (internals.empty()) return std::nullopt;
    const int node = internals[rng.uniform_int(internals.size())];
    const auto old_rule = st.tree.node(node).split;
    const auto pts = points_reaching(st.tree, data, node);
    const int pt = pts[rng.uniform_int(pts.size())];
    const double tau = data.x(pt, old_rule.axis);

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.set_rule(node, SplitRule{old_rule.axis, tau});
    prop.subset = st.subset;
    prop.members = prop.tree.assign(data);
    if (!members_valid(prop.members, opt.cbar)) return std::nullopt;
    if (!thresholds_in_node(prop.tree, data)) return std::nullopt;

    const int cnt_new = count_value(data, pts, old_rule.axis, tau);
    const int cnt_old = count_value(data, pts, old_rule.axis, old_rule.threshold);
    prop.log_q_fwd = safe_log(kp.change) + safe_log(cnt_new);
    prop.log_q_rev = safe_log(kp.change) + safe_log(cnt_old);
    return prop;
}

std::optional<Proposal> propose_swap(const TreeState& st, const Dataset& data,
                                     const KernelProbs& kp, const KernelOptions& opt, Rng& rng) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < st.tree.node_count(); ++i) {
        const auto& nd = st.tree.node(i);
        if (nd.is_leaf()) continue;
        if (!st.tree.node(nd.left).is_leaf()) pairs.push_back({i, nd.left});
        if (!st.tree.node(nd.right).is_leaf()) pairs.push_back({i, nd.right});
    }
    if (pairs.empty()) return std::nullopt;
    const auto [parent, child] = pairs[rng.uniform_int(pairs.size())];
    const auto rp = st.tree.node(parent).split;
    const auto rc = st.tree.node(child).split;

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.set_rule(parent, rc);
    prop.tree.set_rule(child, rp);
    prop.subset = st.subset;
    prop.members = prop.tree.assign(data);
    if (!members_valid(prop.members, opt.cbar)) return std::nullopt;
    if (!thresholds_in_node(prop.tree, data)) return std::nullopt;
    prop.log_q_fwd = safe_log(kp.swap) - safe_log(pairs.size());
    prop.log_q_rev = prop.log_q_fwd;  // same structure, same pair count
    return prop;
}

std::optional<Proposal> propose_var_add(const TreeState& st, const Dataset& data,
                                        const KernelProbs& kp, const KernelOptions& opt,
                                        Rng& rng) {
    const int q = static_cast<int>(st.subset.size());
    if (q == data.p()) return std::nullopt;
    // uniform draw from the complement of the active set
    int pick = static_cast<int>(rng.uniform_int(data.p() - q));
    int axis = -1;
    for (int j = 0; j < data.p(); ++j) {
        if (std::binary_search(st.subset.begin(), st.subset.end(), j)) continue;
        if (pick-- == 0) {
            axis = j;
            break;
        }
    }
    auto prop = propose_grow_common(st, data, opt, rng, axis,
                                    safe_log(kp.var_add) - safe_log(data.p() - q),
                                    kp.var_remove, true);
    if (!prop) return std::nullopt;
    prop->subset = st.subset;
    prop->subset.insert(std::lower_bound(prop->subset.begin(), prop->subset.end(), axis), axis);
    return prop;
}

std::optional<Proposal> propose_var_remove(const TreeState& st, const Dataset& data,
                                           const KernelProbs& kp, const KernelOptions& opt,
                                           Rng& rng) {
    (void)opt;
    const auto cands = removable_axis_nodes(st.tree, data.p());
    if (cands.empty()) return std::nullopt;
    const int node = cands[rng.uniform_int(cands.size())];
    const auto rule = st.tree.node(node).split;
    const auto merged = points_reaching(st.tree, data, node);

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.prune(node);
    prop.subset = st.subset;
    prop.subset.erase(std::find(prop.subset.begin(), prop.subset.end(), rule.axis));
    prop.members = prop.tree.assign(data);

    const int cnt = count_value(data, merged, rule.axis, rule.threshold);
    const int q_new = static_cast<int>(prop.subset.size());
    prop.log_q_fwd = safe_log(kp.var_remove) - safe_log(cands.size());
    prop.log_q_rev = safe_log(kp.var_add) - safe_log(data.p() - q_new) -
                     safe_log(prop.members.size()) + safe_log(cnt) - safe_log(merged.size());
    return prop;
}

std::optional<Proposal> propose_var_swap(const TreeState& st, const Dataset& data,
                                         const KernelProbs& kp, const KernelOptions& opt,
                                         Rng& rng) {
    const int q = static_cast<int>(st.subset.size());
    if (q == 0 || q == data.p()) return std::nullopt;
    const auto singles = single_use_axis_nodes(st.tree, data.p());
    if (singles.empty()) return std::nullopt;
    const int node = singles[rng.uniform_int(singles.size())];
    const auto old_rule = st.tree.node(node).split;
    int pick = static_cast<int>(rng.uniform_int(data.p() - q));
    int axis = -1;
    for (int j = 0; j < data.p(); ++j) {
        if (std::binary_search(st.subset.begin(), st.subset.end(), j)) continue;
        if (pick-- == 0) {
            axis = j;
            break;
        }
    }
    const auto pts = points_reaching(st.tree, data, node);
    const int pt = pts[rng.uniform_int(pts.size())];
    const double tau = data.x(pt, axis);

    Proposal prop;
    prop.tree = st.tree;
    prop.tree.set_rule(node, SplitRule{axis, tau});
    prop.subset = st.subset;
    prop.subset.erase(std::find(prop.subset.begin(), prop.subset.end(), old_rule.axis));
    prop.subset.insert(std::lower_bound(prop.subset.begin(), prop.subset.end(), axis), axis);
    prop.members = prop.tree.assign(data);
    if (!members_valid(prop.members, opt.cbar)) return std::nullopt;
    if (!thresholds_in_node(prop.tree, data)) return std::nullopt;

    const int cnt_new = count_value(data, pts, axis, tau);
    const int cnt_old = count_value(data, pts, old_rule.axis, old_rule.threshold);
    // the set of single-use nodes is unchanged by the relabeling
    prop.log_q_fwd = safe_log(kp.var_swap) - safe_log(singles.size()) -
                     safe_log(data.p() - q) + safe_log(cnt_new) - safe_log(pts.size());
    prop.log_q_rev = safe_log(kp.var_swap) - safe_log(singles.size()) -
                     safe_log(data.p() - q) + safe_log(cnt_old) - safe_log(pts.size());
    return prop;
}

std::optional<Proposal> propose_tree_move(const TreeState& st, const Dataset& data,
                                          const KernelProbs& kp, const KernelOptions& opt,
                                          Rng& rng) {
    switch (draw_move(kp, rng)) {
        case MoveKind::Grow: return propose_grow(st, data, kp, opt, rng);
        case MoveKind::Prune: return propose_prune(st, data, kp, opt, rng);
        case MoveKind::Change: return propose_change(st, data, kp, opt, rng);
        case MoveKind::Swap: return propose_swap(st, data, kp, opt, rng);
        case MoveKind::VarAdd: return propose_var_add(st, data, kp, opt, rng);
        case MoveKind::VarRemove: return propose_var_remove(st, data, kp, opt, rng);
        case MoveKind::VarSwap: return propose_var_swap(st, data, kp, opt, rng);
        default: return std::nullopt;
    }
}

// ---------------------------------------------------------------- recording

struct Recorder {
    ChainTrace trace;
    const Dataset* data;
    std::span<const double> f0;
    bool record_fit;
    bool record_states;

    void init(const Dataset& d, std::span<const double> f0_values, const ChainConfig& cfg) {
        data = &d;
        f0 = f0_values;
        record_fit = cfg.record_fit;
        record_states = cfg.record_states;
        trace.inclusion_counts.assign(d.p(), 0);
        if (record_fit) trace.mean_fit.assign(d.n(), 0.0);
    }

    void keep(std::span<const int> active_union, int T, int K_total, double log_post,
              const std::vector<double>& fit, const std::string& key) {
        ++trace.kept;
        for (int j : active_union) ++trace.inclusion_counts[j];
        ++trace.k_histogram[K_total];
        KeptSample s;
        s.q = static_cast<int>(active_union.size());
        s.T = T;
        s.K_total = K_total;
        s.log_posterior = log_post;
        if (record_fit && !fit.empty()) {
            for (int i = 0; i < data->n(); ++i) trace.mean_fit[i] += fit[i];
            if (!f0.empty()) s.err_n = empirical_norm(fit, f0);
        }
        trace.samples.push_back(s);
        if (record_states) trace.state_keys.push_back(key);
    }

    void finish() {
        if (record_fit && trace.kept > 0)
            for (auto& v : trace.mean_fit) v /= static_cast<double>(trace.kept);
    }
};

std::vector<double> fit_from_members(const std::vector<std::vector<int>>& members,
                                     std::span<const double> beta, int n) {
    std::vector<double> fit(n, 0.0);
    for (std::size_t k = 0; k < members.size(); ++k)
        for (int i : members[k]) fit[i] = beta[k];
    return fit;
}

std::vector<double> gibbs_betas(const std::vector<std::vector<int>>& members,
                                std::span<const double> residuals, double v, Rng& rng) {
    std::vector<double> beta(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
        double s = 0.0;
        for (int i : members[k]) s += residuals[i];
        const int nk = static_cast<int>(members[k].size());
        beta[k] = rng.normal(cell_posterior_mean(nk, s, v), cell_posterior_variance(nk, v));
    }
    return beta;
}

}  // namespace

// ------------------------------------------------------------------ config

void MoveProbabilities::validate(SamplerMode mode) const {
    const double vals[] = {grow,    prune,      change,    swap,      var_add,
                           var_remove, var_swap, tree_birth, tree_death};
    double sum = 0.0;
    for (double v : vals) {
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("MoveProbabilities: entries must lie in [0,1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("MoveProbabilities: probabilities must sum to 1");
    if ((grow > 0.0) != (prune > 0.0))
        throw std::invalid_argument("MoveProbabilities: grow and prune must be paired");
    if ((var_add > 0.0) != (var_remove > 0.0))
        throw std::invalid_argument("MoveProbabilities: var-add and var-remove must be paired");
    if ((tree_birth > 0.0) != (tree_death > 0.0))
        throw std::invalid_argument("MoveProbabilities: birth and death must be paired");
    if (mode != SamplerMode::ForestPerTreeS && tree_birth > 0.0)
        throw std::invalid_argument(
            "MoveProbabilities: birth/death moves require the per-tree-S forest mode");
}

MoveProbabilities MoveProbabilities::forest_default() {
    MoveProbabilities m;
    m.grow = 0.20;
    m.prune = 0.20;
    m.change = 0.15;
    m.swap = 0.05;
    m.var_add = 0.08;
    m.var_remove = 0.08;
    m.var_swap = 0.04;
    m.tree_birth = 0.10;
    m.tree_death = 0.10;
    return m;
}

void ChainConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("ChainConfig: iterations must be positive");
    if (effective_burn_in() >= iterations)
        throw std::invalid_argument("ChainConfig: burn-in must be below the iteration count");
    if (thinning < 1) throw std::invalid_argument("ChainConfig: thinning must be >= 1");
    if (initial_trees < 1) throw std::invalid_argument("ChainConfig: initial_trees must be >= 1");
    moves.validate(mode);
}

std::string model_state_key(std::span<const int> subset, const TreePartition& tree,
                            const Dataset& data) {
    std::ostringstream out;
    for (int j : subset) out << j << ',';
    out << '#' << partition_key(tree, data);
    return out.str();
}

// -------------------------------------------------------------- cart chain

ChainTrace run_cart_chain(const Dataset& data, const PriorConfig& prior, const ChainConfig& cfg,
                          std::span<const double> f0_values) {
    prior.validate();
    cfg.validate();
    if (cfg.mode != SamplerMode::Cart)
        throw std::invalid_argument("run_cart_chain: config mode must be cart");

    Rng rng(cfg.seed);
    PriorTables tab(prior, data);
    KernelOptions opt{tab.K_cap, prior.cbar, true};
    KernelProbs kp{cfg.moves.grow,    cfg.moves.prune,      cfg.moves.change,
                   cfg.moves.swap,    cfg.moves.var_add,    cfg.moves.var_remove,
                   cfg.moves.var_swap};

    const std::span<const double> residuals(data.y());
    const double v = prior.tree_step_variance(1);

    TreeState st;
    st.tree = TreePartition::single_leaf();
    st.members = st.tree.assign(data);
    double log_ml = ml_from_members(st.members, residuals, v);
    double log_structure = tree_log_structure(st.tree, 0, tab, 1, true);

    Recorder rec;
    rec.init(data, f0_values, cfg);
    const long long burn = cfg.effective_burn_in();

    for (long long iter = 0; iter < cfg.iterations; ++iter) {
        ++rec.trace.proposals;
        auto prop = propose_tree_move(st, data, kp, opt, rng);
        if (prop) {
            const double cand_ml = ml_from_members(prop->members, residuals, v);
            const double cand_structure = tree_log_structure(
                prop->tree, static_cast<int>(prop->subset.size()), tab, 1, true);
            const double log_alpha = (cand_structure + cand_ml) - (log_structure + log_ml) +
                                     (prop->log_q_rev - prop->log_q_fwd);
            if (std::log(rng.uniform()) < log_alpha) {
                ++rec.trace.accepts;
                st.tree = std::move(prop->tree);
                st.subset = std::move(prop->subset);
                st.members = std::move(prop->members);
                log_ml = cand_ml;
                log_structure = cand_structure;
            }
        }
        if (iter >= burn && (iter - burn) % cfg.thinning == 0) {
            std::vector<double> fit;
            if (cfg.record_fit) {
                const auto beta = gibbs_betas(st.members, residuals, v, rng);
                fit = fit_from_members(st.members, beta, data.n());
            }
            rec.keep(st.subset, 1, static_cast<int>(st.members.size()),
                     log_structure + log_ml, fit,
                     cfg.record_states ? model_state_key(st.subset, st.tree, data) : "");
        }
    }
    rec.finish();
    return rec.trace;
}

// ------------------------------------------------------------ forest chain

namespace {

struct ForestState {
    std::vector<TreeState> trees;
    std::vector<std::vector<double>> betas;
    std::vector<std::vector<double>> fits;  // per-tree fitted values
    std::vector<double> total_fit;

    int T() const { return static_cast<int>(trees.size()); }
    int total_leaves() const {
        int s = 0;
        for (const auto& t : trees) s += t.tree.leaf_count();
        return s;
    }
    std::vector<int> active_union(int p) const {
        std::vector<bool> in(p, false);
        for (const auto& t : trees)
            for (int j : t.subset) in[j] = true;
        std::vector<int> out;
        for (int j = 0; j < p; ++j)
            if (in[j]) out.push_back(j);
        return out;
    }
};

// Log marginal of y over all step heights jointly: y ~ N(0, v A A' + I)
// where A is the point-to-leaf incidence across all trees.
double joint_log_marginal(const Dataset& data, std::span<const double> y, double v,
                          const std::vector<const std::vector<std::vector<int>>*>& members) {
    int cols = 0;
    std::vector<int> offset(members.size(), 0);
    for (std::size_t t = 0; t < members.size(); ++t) {
        offset[t] = cols;
        cols += static_cast<int>(members[t]->size());
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(cols);
    double yy = 0.0;
    const int n = data.n();
    std::vector<std::vector<int>> col_of_point(members.size(), std::vector<int>(n));
    for (std::size_t t = 0; t < members.size(); ++t)
        for (std::size_t k = 0; k < members[t]->size(); ++k)
            for (int i : (*members[t])[k]) col_of_point[t][i] = offset[t] + static_cast<int>(k);
    for (int i = 0; i < n; ++i) {
        yy += y[i] * y[i];
        for (std::size_t t = 0; t < members.size(); ++t) {
            const int ci = col_of_point[t][i];
            b(ci) += y[i];
            for (std::size_t u = 0; u < members.size(); ++u) M(ci, col_of_point[u][i]) += 1.0;
        }
    }
    Eigen::MatrixXd P = M + Eigen::MatrixXd::Identity(cols, cols) / v;
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("joint_log_marginal: Cholesky failed");
    double logdet_P = 0.0;
    for (int i = 0; i < cols; ++i) logdet_P += 2.0 * std::log(llt.matrixL()(i, i));
    const double logdet = cols * std::log(v) + logdet_P;  // logdet(I + v M)
    const Eigen::VectorXd sol = llt.solve(b);
    const double quad = yy - b.dot(sol);
    return -0.5 * n * kLog2Pi - 0.5 * logdet - 0.5 * quad;
}

// Joint Gibbs redraw of every step height given the topologies.
void joint_gibbs_all_betas(ForestState& fs, const Dataset& data, std::span<const double> y,
                           double v, Rng& rng) {
    const int T = fs.T();
    int cols = 0;
    std::vector<int> offset(T, 0);
    for (int t = 0; t < T; ++t) {
        offset[t] = cols;
        cols += fs.trees[t].tree.leaf_count();
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(cols);
    const int n = data.n();
    std::vector<std::vector<int>> col_of_point(T, std::vector<int>(n));
    for (int t = 0; t < T; ++t)
        for (std::size_t k = 0; k < fs.trees[t].members.size(); ++k)
            for (int i : fs.trees[t].members[k])
                col_of_point[t][i] = offset[t] + static_cast<int>(k);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t) {
            const int ci = col_of_point[t][i];
            b(ci) += y[i];
            for (int u = 0; u < T; ++u) M(ci, col_of_point[u][i]) += 1.0;
        }
    Eigen::MatrixXd P = M + Eigen::MatrixXd::Identity(cols, cols) / v;
    Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("joint_gibbs_all_betas: Cholesky failed");
    const Eigen::VectorXd mean = llt.solve(b);
    Eigen::VectorXd z(cols);
    for (int i = 0; i < cols; ++i) z(i) = rng.normal();
    const Eigen::VectorXd draw =
        mean + llt.matrixU().solve(z);  // U = L', cov = P^{-1}
    for (int t = 0; t < T; ++t) {
        auto& beta = fs.betas[t];
        beta.resize(fs.trees[t].tree.leaf_count());
        for (std::size_t k = 0; k < beta.size(); ++k) beta[k] = draw(offset[t] + k);
        fs.fits[t] = fit_from_members(fs.trees[t].members, beta, n);
    }
    fs.total_fit.assign(n, 0.0);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) fs.total_fit[i] += fs.fits[t][i];
}

double instantiated_log_posterior(const ForestState& fs, const Dataset& data,
                                  const PriorConfig& prior, PriorTables& tab, SamplerMode mode) {
    const int T = fs.T();
    const double v = prior.tree_step_variance(T);
    double s = tab.log_pi_T(T);
    if (mode == SamplerMode::ForestSharedS) {
        const int q = static_cast<int>(fs.trees.front().subset.size());
        s += tab.log_pi_q[q] + tab.log_subset(q);
    }
    for (int t = 0; t < T; ++t) {
        s += tree_log_structure(fs.trees[t].tree, static_cast<int>(fs.trees[t].subset.size()),
                                tab, T, mode == SamplerMode::ForestPerTreeS);
        for (double bk : fs.betas[t])
            s += -0.5 * std::log(6.283185307179586 * v) - bk * bk / (2.0 * v);
    }
    for (int i = 0; i < data.n(); ++i) {
        const double r = data.y()[i] - fs.total_fit[i];
        s += -0.5 * kLog2Pi - 0.5 * r * r;
    }
    return s;
}

// Prior + likelihood change of appending one single-leaf tree to a forest of
// T_before trees, the new step integrated against residuals r.
double birth_delta(const ForestState& fs, const Dataset& data, const PriorConfig& prior,
                   PriorTables& tab, std::span<const double> r, int skip_tree = -1) {
    const int T_before = fs.T() - (skip_tree >= 0 ? 1 : 0);
    const int T_after = T_before + 1;
    double sum_r = 0.0, sum_r2 = 0.0;
    for (double x : r) {
        sum_r += x;
        sum_r2 += x * x;
    }
    const double v_after = prior.step_variance / T_after;
    const double v_before = prior.step_variance / T_before;
    double d = tab.log_pi_T(T_after) - tab.log_pi_T(T_before);
    d += tab.log_pi_K(1, T_after);
    d += tab.log_pi_q[0] + tab.log_subset(0);
    for (int t = 0; t < fs.T(); ++t) {
        if (t == skip_tree) continue;
        const int K = fs.trees[t].tree.leaf_count();
        d += tab.log_pi_K(K, T_after) - tab.log_pi_K(K, T_before);
        for (double bk : fs.betas[t]) {
            d += -0.5 * std::log(v_after) - bk * bk / (2.0 * v_after);
            d -= -0.5 * std::log(v_before) - bk * bk / (2.0 * v_before);
        }
    }
    const int n = data.n();
    d += cell_log_marginal(n, sum_r, sum_r2, v_after) - (-0.5 * n * kLog2Pi - 0.5 * sum_r2);
    return d;
}

}  // namespace

ChainTrace run_forest_chain(const Dataset& data, const PriorConfig& prior,
                            const ChainConfig& cfg, std::span<const double> f0_values) {
    prior.validate();
    cfg.validate();
    if (cfg.mode == SamplerMode::Cart)
        throw std::invalid_argument("run_forest_chain: config mode must be a forest mode");
    const bool per_tree_s = cfg.mode == SamplerMode::ForestPerTreeS;

    Rng rng(cfg.seed);
    PriorTables tab(prior, data);
    const int n = data.n();
    const std::vector<double>& y = data.y();

    ForestState fs;
    for (int t = 0; t < cfg.initial_trees; ++t) {
        TreeState ts;
        ts.tree = TreePartition::single_leaf();
        ts.members = ts.tree.assign(data);
        fs.trees.push_back(std::move(ts));
        fs.betas.push_back({0.0});
        fs.fits.emplace_back(n, 0.0);
    }
    fs.total_fit.assign(n, 0.0);

    // Per-tree kernel renormalizes the within-tree moves; the sweep-level
    // kernel owns birth/death (per-tree-S) or the composite subset moves
    // (shared-S).
    KernelProbs kp{cfg.moves.grow,    cfg.moves.prune,      cfg.moves.change,
                   cfg.moves.swap,    cfg.moves.var_add,    cfg.moves.var_remove,
                   cfg.moves.var_swap};
    double sweep_birth = cfg.moves.tree_birth, sweep_death = cfg.moves.tree_death;
    double sweep_va = 0.0, sweep_vr = 0.0, sweep_vs = 0.0;
    if (!per_tree_s) {
        sweep_va = cfg.moves.var_add;
        sweep_vr = cfg.moves.var_remove;
        sweep_vs = cfg.moves.var_swap;
        kp.var_add = kp.var_remove = kp.var_swap = 0.0;
    }
    KernelOptions opt{tab.K_cap, prior.cbar, per_tree_s};

    Recorder rec;
    rec.init(data, f0_values, cfg);
    const long long burn = cfg.effective_burn_in();
    std::vector<double> resid(n);

    for (long long iter = 0; iter < cfg.iterations; ++iter) {
        const int T = fs.T();
        const double v = prior.tree_step_variance(T);

        for (int t = 0; t < T; ++t) {
            auto& ts = fs.trees[t];
            for (int i = 0; i < n; ++i) resid[i] = y[i] - fs.total_fit[i] + fs.fits[t][i];
            const double cur_ml = ml_from_members(ts.members, resid, v);
            const double cur_structure = tree_log_structure(
                ts.tree, static_cast<int>(ts.subset.size()), tab, T, per_tree_s);
            ++rec.trace.proposals;
            auto prop = propose_tree_move(ts, data, kp, opt, rng);
            if (prop) {
                const double cand_ml = ml_from_members(prop->members, resid, v);
                const double cand_structure = tree_log_structure(
                    prop->tree, static_cast<int>(prop->subset.size()), tab, T, per_tree_s);
                const double log_alpha = (cand_structure + cand_ml) -
                                         (cur_structure + cur_ml) +
                                         (prop->log_q_rev - prop->log_q_fwd);
                if (std::log(rng.uniform()) < log_alpha) {
                    ++rec.trace.accepts;
                    ts.tree = std::move(prop->tree);
                    ts.subset = std::move(prop->subset);
                    ts.members = std::move(prop->members);
                }
            }
            // Gibbs refresh of this tree's steps against its residuals.
            fs.betas[t] = gibbs_betas(ts.members, resid, v, rng);
            const auto new_fit = fit_from_members(ts.members, fs.betas[t], n);
            for (int i = 0; i < n; ++i) fs.total_fit[i] += new_fit[i] - fs.fits[t][i];
            fs.fits[t] = new_fit;
        }

        // Sweep-level dimension moves.
        const double u = rng.uniform();
        if (per_tree_s) {
            if (u < sweep_birth) {
                ++rec.trace.proposals;
                for (int i = 0; i < n; ++i) resid[i] = y[i] - fs.total_fit[i];
                const double delta = birth_delta(fs, data, prior, tab, resid);
                int singles_after = 1;
                for (const auto& ts : fs.trees)
                    if (ts.tree.leaf_count() == 1) ++singles_after;
                const double log_q_fwd = safe_log(sweep_birth) - safe_log(fs.T() + 1);
                const double log_q_rev = safe_log(sweep_death) - safe_log(singles_after);
                if (std::log(rng.uniform()) < delta + log_q_rev - log_q_fwd) {
                    ++rec.trace.accepts;
                    const int pos = static_cast<int>(rng.uniform_int(fs.T() + 1));
                    const int T_after = fs.T() + 1;
                    const double v_new = prior.step_variance / T_after;
                    double sum_r = 0.0;
                    for (double x : resid) sum_r += x;
                    TreeState ts;
                    ts.tree = TreePartition::single_leaf();
                    ts.members = ts.tree.assign(data);
                    const double beta0 = rng.normal(cell_posterior_mean(n, sum_r, v_new),
                                                    cell_posterior_variance(n, v_new));
                    fs.trees.insert(fs.trees.begin() + pos, std::move(ts));
                    fs.betas.insert(fs.betas.begin() + pos, {beta0});
                    fs.fits.insert(fs.fits.begin() + pos, std::vector<double>(n, beta0));
                    for (int i = 0; i < n; ++i) fs.total_fit[i] += beta0;
                }
            } else if (u < sweep_birth + sweep_death && fs.T() > 1) {
                ++rec.trace.proposals;
                std::vector<int> singles;
                for (int t = 0; t < fs.T(); ++t)
                    if (fs.trees[t].tree.leaf_count() == 1) singles.push_back(t);
                if (!singles.empty()) {
                    const int victim = singles[rng.uniform_int(singles.size())];
                    for (int i = 0; i < n; ++i)
                        resid[i] = y[i] - fs.total_fit[i] + fs.fits[victim][i];
                    const double delta = birth_delta(fs, data, prior, tab, resid, victim);
                    const double log_q_fwd = safe_log(sweep_death) - safe_log(singles.size());
                    const double log_q_rev = safe_log(sweep_birth) - safe_log(fs.T());
                    if (std::log(rng.uniform()) < -delta + log_q_rev - log_q_fwd) {
                        ++rec.trace.accepts;
                        for (int i = 0; i < n; ++i) fs.total_fit[i] -= fs.fits[victim][i];
                        fs.trees.erase(fs.trees.begin() + victim);
                        fs.betas.erase(fs.betas.begin() + victim);
                        fs.fits.erase(fs.fits.begin() + victim);
                    }
                }
            }
        } else if (u < sweep_va + sweep_vr + sweep_vs) {
            // Shared-S composite subset moves with every step height
            // integrated out jointly; accepted moves trigger a joint redraw.
            ++rec.trace.proposals;
            const auto& shared = fs.trees.front().subset;
            const int q = static_cast<int>(shared.size());
            const int p = data.p();
            std::vector<const std::vector<std::vector<int>>*> cur_members;
            for (const auto& ts : fs.trees) cur_members.push_back(&ts.members);

            std::optional<std::vector<TreeState>> cand;
            double log_q_fwd = 0.0, log_q_rev = 0.0, d_structure = 0.0;

            auto shared_removable = [&](const std::vector<TreeState>& trees) {
                // axes whose only split in every tree is a prunable node
                std::vector<int> out;
                const auto& sub = trees.front().subset;
                for (int j : sub) {
                    bool ok = true;
                    for (const auto& ts : trees) {
                        const auto counts = ts.tree.axis_use_counts(p);
                        if (counts[j] != 1) {
                            ok = false;
                            break;
                        }
                        bool prunable = false;
                        for (int nidx = 0; nidx < ts.tree.node_count(); ++nidx) {
                            const auto& nd = ts.tree.node(nidx);
                            if (!nd.is_leaf() && nd.split.axis == j &&
                                ts.tree.node(nd.left).is_leaf() &&
                                ts.tree.node(nd.right).is_leaf())
                                prunable = true;
                        }
                        if (!prunable) {
                            ok = false;
                            break;
                        }
                    }
                    if (ok) out.push_back(j);
                }
                return out;
            };

            if (u < sweep_va && q < p) {
                // grow every tree on a fresh axis
                int pick = static_cast<int>(rng.uniform_int(p - q));
                int axis = -1;
                for (int j = 0; j < p; ++j) {
                    if (std::binary_search(shared.begin(), shared.end(), j)) continue;
                    if (pick-- == 0) {
                        axis = j;
                        break;
                    }
                }
                std::vector<TreeState> next = fs.trees;
                bool ok = true;
                log_q_fwd = safe_log(sweep_va) - safe_log(p - q);
                for (auto& ts : next) {
                    const int K = ts.tree.leaf_count();
                    if (K + 1 > opt.K_cap) {
                        ok = false;
                        break;
                    }
                    const auto leaves = ts.tree.leaves();
                    const int li = static_cast<int>(rng.uniform_int(K));
                    const auto pts = ts.members[li];
                    const int pt = pts[rng.uniform_int(pts.size())];
                    const double tau = data.x(pt, axis);
                    ts.tree.grow(leaves[li], SplitRule{axis, tau});
                    ts.members = ts.tree.assign(data);
                    if (!members_valid(ts.members, prior.cbar)) {
                        ok = false;
                        break;
                    }
                    const int cnt = count_value(data, pts, axis, tau);
                    log_q_fwd += -safe_log(K) + safe_log(cnt) - safe_log(pts.size());
                    d_structure += tab.log_pi_K(K + 1, T) - tab.log_pi_K(K, T);
                    d_structure += -log_partitioning_number(n, q + 1, K + 1) +
                                   log_partitioning_number(n, q, K);
                    d_structure += ts.tree.log_sequence_count();
                }
                if (ok) {
                    for (const auto& ts : fs.trees) d_structure -= ts.tree.log_sequence_count();
                    d_structure += tab.log_pi_q[q + 1] - tab.log_pi_q[q];
                    d_structure += tab.log_subset(q + 1) - tab.log_subset(q);
                    for (auto& ts : next)
                        ts.subset.insert(
                            std::lower_bound(ts.subset.begin(), ts.subset.end(), axis), axis);
                    log_q_rev = safe_log(sweep_vr) - safe_log(shared_removable(next).size());
                    cand = std::move(next);
                }
            } else if (u < sweep_va + sweep_vr && q > 0) {
                const auto removable = shared_removable(fs.trees);
                if (!removable.empty()) {
                    const int axis =
                        removable[rng.uniform_int(removable.size())];
                    std::vector<TreeState> next = fs.trees;
                    log_q_fwd = safe_log(sweep_vr) - safe_log(removable.size());
                    log_q_rev = safe_log(sweep_va) - safe_log(p - (q - 1));
                    for (auto& ts : next) {
                        int node = -1;
                        for (int nidx = 0; nidx < ts.tree.node_count(); ++nidx) {
                            const auto& nd = ts.tree.node(nidx);
                            if (!nd.is_leaf() && nd.split.axis == axis) node = nidx;
                        }
                        const auto rule = ts.tree.node(node).split;
                        const auto merged = points_reaching(ts.tree, data, node);
                        const int K = ts.tree.leaf_count();
                        d_structure += tab.log_pi_K(K - 1, T) - tab.log_pi_K(K, T);
                        d_structure += -log_partitioning_number(n, q - 1, K - 1) +
                                       log_partitioning_number(n, q, K);
                        d_structure -= ts.tree.log_sequence_count();
                        ts.tree.prune(node);
                        ts.members = ts.tree.assign(data);
                        ts.subset.erase(
                            std::find(ts.subset.begin(), ts.subset.end(), axis));
                        d_structure += ts.tree.log_sequence_count();
                        const int cnt = count_value(data, merged, axis, rule.threshold);
                        log_q_rev += -safe_log(K - 1) + safe_log(cnt) - safe_log(merged.size());
                    }
                    d_structure += tab.log_pi_q[q - 1] - tab.log_pi_q[q];
                    d_structure += tab.log_subset(q - 1) - tab.log_subset(q);
                    cand = std::move(next);
                }
            } else if (u < sweep_va + sweep_vr + sweep_vs && q > 0 && q < p) {
                // relabel an axis used exactly once in every tree
                std::vector<int> swappable;
                for (int j : shared) {
                    bool ok = true;
                    for (const auto& ts : fs.trees)
                        if (ts.tree.axis_use_counts(p)[j] != 1) ok = false;
                    if (ok) swappable.push_back(j);
                }
                if (!swappable.empty()) {
                    const int axis = swappable[rng.uniform_int(swappable.size())];
                    int pick = static_cast<int>(rng.uniform_int(p - q));
                    int fresh = -1;
                    for (int j = 0; j < p; ++j) {
                        if (std::binary_search(shared.begin(), shared.end(), j)) continue;
                        if (pick-- == 0) {
                            fresh = j;
                            break;
                        }
                    }
                    std::vector<TreeState> next = fs.trees;
                    bool ok = true;
                    log_q_fwd = safe_log(sweep_vs) - safe_log(swappable.size()) - safe_log(p - q);
                    log_q_rev = safe_log(sweep_vs) - safe_log(swappable.size()) - safe_log(p - q);
                    for (auto& ts : next) {
                        int node = -1;
                        for (int nidx = 0; nidx < ts.tree.node_count(); ++nidx) {
                            const auto& nd = ts.tree.node(nidx);
                            if (!nd.is_leaf() && nd.split.axis == axis) node = nidx;
                        }
                        const auto old_rule = ts.tree.node(node).split;
                        const auto pts = points_reaching(ts.tree, data, node);
                        const int pt = pts[rng.uniform_int(pts.size())];
                        const double tau = data.x(pt, fresh);
                        ts.tree.set_rule(node, SplitRule{fresh, tau});
                        ts.members = ts.tree.assign(data);
                        if (!members_valid(ts.members, prior.cbar) ||
                            !thresholds_in_node(ts.tree, data)) {
                            ok = false;
                            break;
                        }
                        ts.subset.erase(std::find(ts.subset.begin(), ts.subset.end(), axis));
                        ts.subset.insert(
                            std::lower_bound(ts.subset.begin(), ts.subset.end(), fresh), fresh);
                        log_q_fwd += safe_log(count_value(data, pts, fresh, tau)) -
                                     safe_log(pts.size());
                        log_q_rev += safe_log(count_value(data, pts, old_rule.axis,
                                                          old_rule.threshold)) -
                                     safe_log(pts.size());
                    }
                    if (ok) cand = std::move(next);
                }
            }

            if (cand) {
                std::vector<const std::vector<std::vector<int>>*> cand_members;
                for (const auto& ts : *cand) cand_members.push_back(&ts.members);
                const double cur_joint = joint_log_marginal(data, y, v, cur_members);
                const double cand_joint = joint_log_marginal(data, y, v, cand_members);
                const double log_alpha =
                    d_structure + (cand_joint - cur_joint) + (log_q_rev - log_q_fwd);
                if (std::log(rng.uniform()) < log_alpha) {
                    ++rec.trace.accepts;
                    fs.trees = std::move(*cand);
                    joint_gibbs_all_betas(fs, data, y, v, rng);
                }
            }
        }

        if (cfg.check_residuals) {
            // reference path: rebuild every fit from scratch
            std::vector<double> reference(n, 0.0);
            for (int t = 0; t < fs.T(); ++t) {
                const auto full = fit_from_members(fs.trees[t].members, fs.betas[t], n);
                for (int i = 0; i < n; ++i) reference[i] += full[i];
            }
            for (int i = 0; i < n; ++i)
                if (std::abs(reference[i] - fs.total_fit[i]) > 1e-10)
                    throw std::logic_error(
                        "run_forest_chain: incremental residuals drifted from the reference");
        }

        if (iter >= burn && (iter - burn) % cfg.thinning == 0) {
            std::vector<double> fit;
            if (cfg.record_fit) fit = fs.total_fit;
            std::string key;
            if (cfg.record_states && fs.T() == 1)
                key = model_state_key(fs.trees[0].subset, fs.trees[0].tree, data);
            rec.keep(fs.active_union(data.p()), fs.T(), fs.total_leaves(),
                     instantiated_log_posterior(fs, data, prior, tab, cfg.mode), fit, key);
        }
    }
    rec.finish();
    return rec.trace;
}

}  // namespace spikeforest
