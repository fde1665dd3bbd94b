#include "spikeforest/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spikeforest/combinatorics.hpp"
#include "spikeforest/stats.hpp"

namespace spikeforest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_norm_q(int p, const PriorConfig& cfg) {
    const double L = std::log(cfg.c) + cfg.a * std::log(static_cast<double>(p));
    std::vector<double> terms(p + 1);
    for (int j = 0; j <= p; ++j) terms[j] = -j * L;
    return log_sum_exp(terms);
}

// log sum_{k=1..K_max} lambda^k / k!, or log(e^lambda - 1) when K_max == 0.
double log_norm_K(double lambda, int K_max) {
    if (K_max <= 0) return lambda + std::log1p(-std::exp(-lambda));
    std::vector<double> terms(K_max);
    const double ll = std::log(lambda);
    for (int k = 1; k <= K_max; ++k) terms[k - 1] = k * ll - std::lgamma(k + 1.0);
    return log_sum_exp(terms);
}

double log_norm_T(int T_max, double C_T) {
    // geometric series of exp(-C_T * t), t = 1..T_max
    const double r = std::exp(-C_T);
    return -C_T + std::log1p(-std::pow(r, T_max)) - std::log1p(-r);
}

double log_normal_density(double v, double variance) {
    return -0.5 * std::log(6.283185307179586 * variance) - v * v / (2.0 * variance);
}

}  // namespace

void PriorConfig::validate() const {
    if (!(a > 0.0) || !(c > 0.0) || !(lambda > 0.0))
        throw std::invalid_argument("PriorConfig: a, c, lambda must be positive");
    if (!(C_T > std::log(2.0)))
        throw std::invalid_argument("PriorConfig: C_T must exceed log 2");
    if (cbar < 1) throw std::invalid_argument("PriorConfig: cbar must be a positive integer");
    if (!(step_variance > 0.0))
        throw std::invalid_argument("PriorConfig: step variance must be positive");
    if (gw_gamma && !(*gw_gamma > 0.0 && *gw_gamma <= 0.5))
        throw std::invalid_argument("PriorConfig: gw_gamma must lie in (0, 1/2]");
}

int PriorConfig::effective_K_max(int n) const {
    const int cap = n / (cbar * cbar);  // no valid tree can have more leaves
    if (K_max <= 0) return cap;
    return std::min(K_max, cap);
}

double log_prior_q(int q, int p, const PriorConfig& cfg) {
    if (q < 0 || q > p) throw std::invalid_argument("log_prior_q: need 0 <= q <= p");
    const double L = std::log(cfg.c) + cfg.a * std::log(static_cast<double>(p));
    return -q * L - log_norm_q(p, cfg);
}

double log_prior_subset(std::span<const int> subset, int q, int p) {
    if (static_cast<int>(subset.size()) != q)
        throw std::invalid_argument("log_prior_subset: |S| must equal q");
    for (int j : subset)
        if (j < 0 || j >= p) throw std::invalid_argument("log_prior_subset: axis out of range");
    return -log_choose(p, q);
}

double log_prior_K(int K, const PriorConfig& cfg) {
    if (K < 1) throw std::invalid_argument("log_prior_K: K must be >= 1");
    if (cfg.K_max > 0 && K > cfg.K_max) return kNegInf;
    return K * std::log(cfg.lambda) - std::lgamma(K + 1.0) - log_norm_K(cfg.lambda, cfg.K_max);
}

double log_prior_K_forest(int K, int T, const PriorConfig& cfg) {
    if (K < 1) throw std::invalid_argument("log_prior_K_forest: K must be >= 1");
    if (T < 1) throw std::invalid_argument("log_prior_K_forest: T must be >= 1");
    if (cfg.K_max > 0 && K > cfg.K_max) return kNegInf;
    const double rate = cfg.lambda / T;
    return K * std::log(rate) - std::lgamma(K + 1.0) - log_norm_K(rate, cfg.K_max);
}

std::vector<double> galton_watson_leaf_pmf(double gamma, int K_max) {
    if (!(gamma > 0.0 && gamma <= 0.5))
        throw std::invalid_argument("galton_watson_leaf_pmf: gamma must lie in (0, 1/2]");
    // P(1) = 1-gamma; P(k) = gamma * sum_j P(j) P(k-j).
    std::vector<double> pmf(K_max + 1, 0.0);
    pmf[1] = 1.0 - gamma;
    for (int k = 2; k <= K_max; ++k) {
        double s = 0.0;
        for (int j = 1; j < k; ++j) s += pmf[j] * pmf[k - j];
        pmf[k] = gamma * s;
    }
    return pmf;
}

double log_prior_K_galton_watson(int K, const PriorConfig& cfg) {
    if (!cfg.gw_gamma)
        throw std::invalid_argument("log_prior_K_galton_watson: gw_gamma is not configured");
    if (K < 1) throw std::invalid_argument("log_prior_K_galton_watson: K must be >= 1");
    const int cap = cfg.K_max > 0 ? cfg.K_max : 64;
    if (K > cap) return kNegInf;
    const auto pmf = galton_watson_leaf_pmf(*cfg.gw_gamma, cap);
    return pmf[K] > 0.0 ? std::log(pmf[K]) : kNegInf;
}

double log_prior_tree(const TreePartition& tree, std::span<const int> subset, int K,
                      const Dataset& data, const PriorConfig& cfg) {
    if (tree.leaf_count() != K) return kNegInf;
    if (!is_valid(tree, data, cfg.cbar)) return kNegInf;
    std::vector<int> want(subset.begin(), subset.end());
    std::sort(want.begin(), want.end());
    if (tree.axes_used() != want) return kNegInf;
    return -log_partitioning_number(data.n(), static_cast<int>(want.size()), K);
}

double log_prior_steps(std::span<const double> beta, const PriorConfig& cfg, int T) {
    const double v = cfg.tree_step_variance(T);
    double s = 0.0;
    for (double b : beta) s += log_normal_density(b, v);
    return s;
}

double log_prior_T(int T, int n, const PriorConfig& cfg) {
    const int T_max = cfg.effective_T_max(n);
    if (T < 1 || T > T_max) return kNegInf;
    return -cfg.C_T * T - log_norm_T(T_max, cfg.C_T);
}

double log_prior_forest_shape(int T, std::span<const int> K_vec, int q, int p, int n,
                              const PriorConfig& cfg) {
    if (static_cast<int>(K_vec.size()) != T)
        throw std::invalid_argument("log_prior_forest_shape: K vector length must equal T");
    double s = log_prior_T(T, n, cfg) + log_prior_q(q, p, cfg) - log_choose(p, q);
    for (int K : K_vec) s += log_prior_K_forest(K, T, cfg);
    return s;
}

double log_prior_forest_shape(int T, std::span<const int> K_vec, std::span<const int> q_vec,
                              int p, int n, const PriorConfig& cfg) {
    if (static_cast<int>(K_vec.size()) != T || static_cast<int>(q_vec.size()) != T)
        throw std::invalid_argument("log_prior_forest_shape: per-tree vectors must have length T");
    double s = log_prior_T(T, n, cfg);
    for (int t = 0; t < T; ++t) {
        s += log_prior_q(q_vec[t], p, cfg) - log_choose(p, q_vec[t]);
        s += log_prior_K_forest(K_vec[t], T, cfg);
    }
    return s;
}

int ModelState::total_leaves() const {
    int s = 0;
    for (const auto& t : trees) s += t.leaf_count();
    return s;
}

std::optional<TreePartition> sample_tree_by_rejection(const Dataset& data,
                                                      std::span<const int> subset, int K,
                                                      int cbar, Rng& rng, int max_attempts,
                                                      long long* rejections) {
    std::vector<int> axes(subset.begin(), subset.end());
    std::sort(axes.begin(), axes.end());
    if (K == 1) {
        if (axes.empty()) return TreePartition::single_leaf();
        return std::nullopt;
    }
    if (axes.empty() || K > data.n()) return std::nullopt;
    const int need = cbar * cbar;

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        // Uniform split sequence: each step consumes an unused observation
        // and an axis; the observation's cell is split at its value.
        TreePartition tree;
        std::vector<std::vector<int>> members(1);
        members[0].resize(data.n());
        for (int i = 0; i < data.n(); ++i) members[0][i] = i;
        std::vector<int> node_of_leaf = {0};  // arena index per members slot
        std::vector<int> unused(data.n());
        for (int i = 0; i < data.n(); ++i) unused[i] = i;

        bool ok = true;
        for (int step = 0; step < K - 1 && ok; ++step) {
            const std::size_t pick = rng.uniform_int(unused.size());
            const int obs = unused[pick];
            unused[pick] = unused.back();
            unused.pop_back();
            const int axis = axes[rng.uniform_int(axes.size())];
            const double tau = data.x(obs, axis);
            // locate the slot holding obs
            int slot = -1;
            for (std::size_t s = 0; s < members.size() && slot < 0; ++s)
                for (int i : members[s])
                    if (i == obs) {
                        slot = static_cast<int>(s);
                        break;
                    }
            std::vector<int> left, right;
            for (int i : members[slot])
                (data.x(i, axis) <= tau ? left : right).push_back(i);
            if (right.empty()) {
                ok = false;  // split at the cell maximum
                break;
            }
            tree.grow(node_of_leaf[slot], SplitRule{axis, tau});
            const auto& nd = tree.node(node_of_leaf[slot]);
            node_of_leaf[slot] = nd.left;
            members[slot] = std::move(left);
            node_of_leaf.push_back(nd.right);
            members.push_back(std::move(right));
        }
        if (ok) {
            for (const auto& m : members)
                if (static_cast<int>(m.size()) < need) ok = false;
        }
        if (ok && tree.axes_used() != axes) ok = false;
        if (ok) return tree;
        if (rejections) ++*rejections;
    }
    return std::nullopt;
}

namespace {

std::vector<int> draw_subset(int p, int q, Rng& rng) {
    // Floyd's algorithm, then sort.
    std::vector<int> out;
    std::vector<bool> in(p, false);
    for (int j = p - q; j < p; ++j) {
        const int t = static_cast<int>(rng.uniform_int(j + 1));
        if (!in[t]) {
            in[t] = true;
            out.push_back(t);
        } else {
            in[j] = true;
            out.push_back(j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

int draw_categorical_log(std::span<const double> log_weights, Rng& rng) {
    const double norm = log_sum_exp(log_weights);
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        acc += std::exp(log_weights[i] - norm);
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(log_weights.size()) - 1;
}

int draw_q(int p, const PriorConfig& cfg, Rng& rng) {
    std::vector<double> lw(p + 1);
    const double L = std::log(cfg.c) + cfg.a * std::log(static_cast<double>(p));
    for (int j = 0; j <= p; ++j) lw[j] = -j * L;
    return draw_categorical_log(lw, rng);
}

int draw_truncated_poisson(double rate, int K_max, Rng& rng) {
    std::vector<double> lw(K_max);
    const double lr = std::log(rate);
    for (int k = 1; k <= K_max; ++k) lw[k - 1] = k * lr - std::lgamma(k + 1.0);
    return 1 + draw_categorical_log(lw, rng);
}

int draw_T(int n, const PriorConfig& cfg, Rng& rng) {
    const int T_max = cfg.effective_T_max(n);
    std::vector<double> lw(T_max);
    for (int t = 1; t <= T_max; ++t) lw[t - 1] = -cfg.C_T * t;
    return 1 + draw_categorical_log(lw, rng);
}

// Tree draw with enumeration fallback; nullopt when the (S, K) combination
// admits no valid tree.
std::optional<TreePartition> draw_tree(const Dataset& data, std::span<const int> subset, int K,
                                       const PriorConfig& cfg, Rng& rng,
                                       PriorSampleDiagnostics* diag) {
    long long rejections = 0;
    auto t = sample_tree_by_rejection(data, subset, K, cfg.cbar, rng, 20000, &rejections);
    if (diag) diag->sequence_rejections += rejections;
    if (t) return t;
    // Rejection failed: either the set is empty or acceptance is tiny.
    if (K > data.n() || static_cast<int>(subset.size()) > K - 1)
        return std::nullopt;  // no tree can use every axis
    const double log_delta =
        log_partitioning_number(data.n(), static_cast<int>(subset.size()), K);
    if (!std::isfinite(log_delta)) return std::nullopt;
    if (log_delta > std::log(1e6)) {
        throw std::runtime_error(
            "sample_from_prior: rejection cap exceeded and instance too large to enumerate "
            "(n=" + std::to_string(data.n()) + ", q=" + std::to_string(subset.size()) +
            ", K=" + std::to_string(K) + ", rejections=" + std::to_string(rejections) + ")");
    }
    if (diag) ++diag->enumeration_fallbacks;
    auto objects = enumerate_valid_tree_objects(data, subset, K, cfg.cbar);
    if (objects.empty()) return std::nullopt;
    std::vector<double> lw(objects.size());
    for (std::size_t i = 0; i < objects.size(); ++i) lw[i] = objects[i].log_sequence_count();
    return objects[draw_categorical_log(lw, rng)];
}

}  // namespace

namespace {

// Draw (S, K, tree) below a fixed subset size. Redrawing below q keeps the
// subset-size marginal at exactly pi(q) even when some (S, K) combinations
// admit no valid tree.
struct TreeDraw {
    std::vector<int> subset;
    TreePartition tree;
};

std::optional<TreeDraw> draw_below_q(const Dataset& data, int q, double rate, int K_cap,
                                     const PriorConfig& cfg, Rng& rng,
                                     PriorSampleDiagnostics* diag, int redraw_cap = 2000) {
    for (int attempt = 0; attempt < redraw_cap; ++attempt) {
        auto subset = draw_subset(data.p(), q, rng);
        const int K = draw_truncated_poisson(rate, K_cap, rng);
        auto tree = draw_tree(data, subset, K, cfg, rng, diag);
        if (tree) return TreeDraw{std::move(subset), std::move(*tree)};
        if (diag) ++diag->config_redraws;
    }
    return std::nullopt;
}

}  // namespace

ModelState sample_from_prior(const PriorConfig& cfg, const Dataset& data, SamplerMode mode,
                             Rng& rng, PriorSampleDiagnostics* diag) {
    cfg.validate();
    const int p = data.p();
    const int K_cap = cfg.effective_K_max(data.n());
    ModelState state;
    state.mode = mode;

    // Infeasible subset sizes (every K <= K_cap below them empty) fall back
    // to a fresh q; feasible sizes keep their pi(q) mass exactly.
    auto draw_tree_layer = [&](double rate) -> TreeDraw {
        for (int outer = 0; outer < 200; ++outer) {
            const int q = draw_q(p, cfg, rng);
            auto draw = draw_below_q(data, q, rate, K_cap, cfg, rng, diag,
                                     q > K_cap - 1 ? 1 : 2000);
            if (draw) return std::move(*draw);
            if (diag) ++diag->config_redraws;
        }
        throw std::runtime_error("sample_from_prior: no valid (q, S, K, tree) found");
    };

    if (mode == SamplerMode::Cart) {
        auto draw = draw_tree_layer(cfg.lambda);
        std::vector<double> beta(draw.tree.leaf_count());
        for (auto& b : beta) b = rng.normal(0.0, cfg.tree_step_variance(1));
        state.subsets.push_back(std::move(draw.subset));
        state.trees.push_back(std::move(draw.tree));
        state.betas.push_back(std::move(beta));
        return state;
    }

    const int T = draw_T(data.n(), cfg, rng);
    if (mode == SamplerMode::ForestSharedS) {
        const int redraw_cap = 2000;
        for (int attempt = 0; attempt < redraw_cap; ++attempt) {
            const int q = draw_q(p, cfg, rng);
            auto shared = draw_subset(p, q, rng);
            state.subsets = {shared};
            state.trees.clear();
            state.betas.clear();
            bool ok = true;
            for (int t = 0; t < T && ok; ++t) {
                // per-tree K redraws keep (T, q, S) fixed
                std::optional<TreePartition> tree;
                for (int inner = 0; inner < 200 && !tree; ++inner) {
                    const int K = draw_truncated_poisson(cfg.lambda / T, K_cap, rng);
                    tree = draw_tree(data, shared, K, cfg, rng, diag);
                    if (!tree && diag) ++diag->config_redraws;
                }
                if (!tree) {
                    ok = false;
                    break;
                }
                std::vector<double> beta(tree->leaf_count());
                for (auto& b : beta) b = rng.normal(0.0, cfg.tree_step_variance(T));
                state.trees.push_back(std::move(*tree));
                state.betas.push_back(std::move(beta));
            }
            if (ok) return state;
            if (diag) ++diag->config_redraws;
        }
        throw std::runtime_error("sample_from_prior: no shared subset admits a valid forest");
    }

    for (int t = 0; t < T; ++t) {
        auto draw = draw_tree_layer(cfg.lambda / T);
        std::vector<double> beta(draw.tree.leaf_count());
        for (auto& b : beta) b = rng.normal(0.0, cfg.tree_step_variance(T));
        state.subsets.push_back(std::move(draw.subset));
        state.trees.push_back(std::move(draw.tree));
        state.betas.push_back(std::move(beta));
    }
    return state;
}

}  // namespace spikeforest
