// Command-line front end: data generation, partition utilities, ensemble
// diagnostics, prior tables, posterior sampling, experiment harness, and the
// verification suite.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spikeforest/combinatorics.hpp"
#include "spikeforest/ensemble.hpp"
#include "spikeforest/exact_posterior.hpp"
#include "spikeforest/experiment.hpp"
#include "spikeforest/kd.hpp"
#include "spikeforest/marginal.hpp"
#include "spikeforest/mcmc.hpp"
#include "spikeforest/stats.hpp"
#include "spikeforest/summaries.hpp"
#include "spikeforest/test_function.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace spikeforest;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::uint64_t seed = 17;
    std::string out_dir = "out";
    int threads = 1;

    json config() const {
        if (config_path.empty()) return json::object();
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config " + config_path);
        json j;
        in >> j;
        return j;
    }
    std::string config_text() const {
        if (config_path.empty()) return "{}";
        std::ifstream in(config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

PriorConfig prior_from_config(const json& j) {
    PriorConfig prior;
    if (!j.contains("prior")) return prior;
    const auto& pj = j.at("prior");
    prior.a = pj.value("a", prior.a);
    prior.c = pj.value("c", prior.c);
    prior.lambda = pj.value("lambda", prior.lambda);
    prior.C_T = pj.value("C_T", prior.C_T);
    prior.cbar = pj.value("cbar", prior.cbar);
    prior.step_variance = pj.value("step_variance", prior.step_variance);
    prior.K_max = pj.value("K_max", prior.K_max);
    prior.T_max = pj.value("T_max", prior.T_max);
    if (pj.contains("gw_gamma")) prior.gw_gamma = pj.at("gw_gamma").get<double>();
    return prior;
}

std::vector<int> parse_subset(const std::string& spec, int p) {
    // 1-based comma list to 0-based indices
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const int j = std::stoi(cell);
        if (j < 1 || j > p) throw std::runtime_error("subset index out of range: " + cell);
        out.push_back(j - 1);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Dataset load_or_fail(const std::string& csv, std::vector<ColumnRescale>* report = nullptr) {
    auto loaded = load_csv(csv);
    if (report) *report = loaded.rescaling;
    return std::move(loaded.data);
}

int run_verify();

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spike-and-forest regression tree engine"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags are accepted after the subcommand too

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--out", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads");

    // ------------------------------------------------------------- data
    auto* data_cmd = app.add_subcommand("data", "generate or inspect datasets");
    std::string data_action = "generate";
    int d_regime = 1, d_n = 200, d_p = 5, d_q0 = 2;
    double d_alpha = 1.0, d_scale = 2.5;
    std::string d_design = "iid-uniform";
    std::string d_csv;
    data_cmd->add_option("action", data_action, "generate | load")->required();
    data_cmd->add_option("--regime", d_regime, "1 or 2");
    data_cmd->add_option("--n", d_n);
    data_cmd->add_option("--p", d_p);
    data_cmd->add_option("--q0", d_q0);
    data_cmd->add_option("--alpha", d_alpha);
    data_cmd->add_option("--scale", d_scale);
    data_cmd->add_option("--design", d_design, "iid-uniform | uniform-grid");
    data_cmd->add_option("--csv", d_csv, "csv path for the load action");

    // -------------------------------------------------------- partition
    auto* part_cmd = app.add_subcommand("partition", "tree partition utilities");
    std::string p_action;
    std::string p_csv, p_subset = "1", p_tree;
    int p_rounds = 1, p_K = 2, p_cbar = 1;
    part_cmd->add_option("action", p_action, "kd-build | validity | diameter | delta | enumerate")
        ->required();
    part_cmd->add_option("--csv", p_csv, "dataset csv")->required();
    part_cmd->add_option("--subset", p_subset, "1-based comma list of axes");
    part_cmd->add_option("--rounds", p_rounds, "k-d rounds per variable");
    part_cmd->add_option("--K", p_K, "leaf count");
    part_cmd->add_option("--cbar", p_cbar, "validity constant");
    part_cmd->add_option("--tree", p_tree, "tree json path (validity, diameter)");

    // --------------------------------------------------------- ensemble
    auto* ens_cmd = app.add_subcommand("ensemble", "forest algebra diagnostics");
    std::string e_action = "figure2";
    int e_T = 3, e_max_leaves = 4, e_n = 40, e_p = 2, e_khat = 8;
    std::string e_format = "text";
    ens_cmd->add_option("action", e_action, "figure2 | random | decompose")->required();
    ens_cmd->add_option("--T", e_T);
    ens_cmd->add_option("--max-leaves", e_max_leaves);
    ens_cmd->add_option("--n", e_n);
    ens_cmd->add_option("--p", e_p);
    ens_cmd->add_option("--khat", e_khat, "leaves of the k-d tree to decompose");
    ens_cmd->add_option("--format", e_format, "text | json");

    // ------------------------------------------------------------- prior
    auto* prior_cmd = app.add_subcommand("prior", "density tables and self-tests");
    std::string pr_action = "table";
    std::string pr_table = "q";
    int pr_p = 10, pr_n = 100;
    prior_cmd->add_option("action", pr_action, "table | selftest")->required();
    prior_cmd->add_option("--table", pr_table, "q | K | T | gw");
    prior_cmd->add_option("--p", pr_p);
    prior_cmd->add_option("--n", pr_n);

    // ------------------------------------------------------------ sample
    auto* sample_cmd = app.add_subcommand("sample", "run an MCMC chain over a dataset");
    std::string s_csv, s_mode = "cart", s_truth;
    long long s_iterations = 20000, s_burn = -1;
    int s_thin = 1, s_chains = 1, s_initial_trees = 1;
    sample_cmd->add_option("--csv", s_csv, "dataset csv")->required();
    sample_cmd->add_option("--mode", s_mode, "cart | forest-shared-s | forest-per-tree-s");
    sample_cmd->add_option("--iterations", s_iterations);
    sample_cmd->add_option("--burn-in", s_burn);
    sample_cmd->add_option("--thinning", s_thin);
    sample_cmd->add_option("--chains", s_chains);
    sample_cmd->add_option("--initial-trees", s_initial_trees);
    sample_cmd->add_option("--truth", s_truth, "json array of f0 values at the design points");

    // -------------------------------------------------------- experiment
    auto* exp_cmd = app.add_subcommand("experiment", "run a scenario from the plan config");
    std::string x_scenario;
    bool x_require_pass = false;
    exp_cmd->add_option("--scenario", x_scenario,
                        "approx-rate | concentration-r1 | concentration-r2 | overfit-probe | "
                        "selection");
    exp_cmd->add_flag("--require-pass", x_require_pass, "exit nonzero when a check fails");

    // ------------------------------------------------------------ verify
    auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");

    CLI11_PARSE(app, argc, argv);

    if (const char* env = std::getenv("SPIKEFOREST_THREADS")) g.threads = std::atoi(env);

    try {
        if (*data_cmd) {
            if (data_action == "generate") {
                const DesignKind design = d_design == "uniform-grid" ? DesignKind::UniformGrid
                                                                     : DesignKind::IidUniform;
                GeneratedExperiment gen =
                    d_regime == 2
                        ? generate_regime2(d_n, d_p,
                                           std::vector<Regime2Component>{{d_q0, d_alpha, d_scale},
                                                                         {d_q0, d_alpha, d_scale}},
                                           g.seed, design)
                        : generate_regime1(d_n, d_p, d_q0, d_alpha, g.seed, design, d_scale);
                fs::create_directories(g.out_dir);
                const auto csv_path = (fs::path(g.out_dir) / "data.csv").string();
                save_csv(gen.data, csv_path);
                ordered_json meta;
                meta["regime"] = d_regime;
                meta["n"] = d_n;
                meta["p"] = d_p;
                meta["seed"] = g.seed;
                meta["holder_norm"] = gen.truth.holder_norm();
                meta["active"] = [&] {
                    std::vector<int> a;
                    for (int j : gen.truth.active_union()) a.push_back(j + 1);
                    return a;
                }();
                meta["f0"] = gen.f0_values;
                std::ofstream meta_out(fs::path(g.out_dir) / "truth.json");
                meta_out << meta.dump(2) << "\n";
                std::cout << "wrote " << csv_path << "\n";
            } else if (data_action == "load") {
                std::vector<ColumnRescale> report;
                auto data = load_or_fail(d_csv, &report);
                ordered_json j;
                j["n"] = data.n();
                j["p"] = data.p();
                ordered_json cols = ordered_json::array();
                for (int c = 0; c < data.p(); ++c) {
                    ordered_json cj;
                    cj["column"] = "x" + std::to_string(c + 1);
                    cj["min"] = report[c].min;
                    cj["max"] = report[c].max;
                    cj["rescaled"] = report[c].applied;
                    cj["constant"] = report[c].constant;
                    cols.push_back(cj);
                }
                j["rescaling"] = cols;
                std::cout << j.dump(2) << "\n";
            } else {
                throw std::runtime_error("data: unknown action " + data_action);
            }
        } else if (*part_cmd) {
            auto data = load_or_fail(p_csv);
            const auto subset = parse_subset(p_subset, data.p());
            if (p_action == "kd-build") {
                auto kd = build_kd_tree(data, subset, p_rounds);
                auto stats = cell_measures(kd, data);
                ordered_json j;
                j["tree"] = json::parse(kd.to_json());
                j["leaf_counts"] = stats.counts;
                std::cout << j.dump(2) << "\n";
            } else if (p_action == "validity") {
                std::ifstream in(p_tree);
                if (!in) throw std::runtime_error("cannot open tree json " + p_tree);
                std::stringstream ss;
                ss << in.rdbuf();
                auto tree = TreePartition::from_json(ss.str());
                std::cout << (is_valid(tree, data, p_cbar) ? "valid" : "invalid") << "\n";
            } else if (p_action == "diameter") {
                TreePartition tree;
                if (!p_tree.empty()) {
                    std::ifstream in(p_tree);
                    std::stringstream ss;
                    ss << in.rdbuf();
                    tree = TreePartition::from_json(ss.str());
                } else {
                    tree = build_kd_tree(data, subset, p_rounds);
                }
                auto d = diameter(tree, data, subset);
                ordered_json j;
                j["per_cell"] = d.per_cell;
                j["partition"] = d.partition;
                std::cout << j.dump(2) << "\n";
            } else if (p_action == "delta") {
                std::cout << partitioning_number(data.n(), static_cast<int>(subset.size()), p_K)
                          << "\n";
            } else if (p_action == "enumerate") {
                auto parts = enumerate_valid_trees(data, subset, p_K, p_cbar);
                ordered_json j;
                j["distinct_partitions"] = parts.size();
                ordered_json list = ordered_json::array();
                for (const auto& part : parts) {
                    ordered_json pj;
                    pj["signature"] = part.signature;
                    pj["tree_objects"] = part.object_count;
                    list.push_back(pj);
                }
                j["partitions"] = list;
                std::cout << j.dump(2) << "\n";
            } else {
                throw std::runtime_error("partition: unknown action " + p_action);
            }
        } else if (*ens_cmd) {
            if (e_action == "figure2") {
                auto ex = worked_two_tree_example();
                auto gp = global_partition(ex.ensemble, ex.data);
                auto sm = stretching_matrix(ex.ensemble, gp);
                bool ok = sm.rows == 7 && sm.cols == 6;
                for (int i = 0; ok && i < sm.rows; ++i)
                    for (int j = 0; j < sm.cols; ++j)
                        if (sm.entry(i, j) != ex.expected_a[i][j]) ok = false;
                for (int i = 0; ok && i < sm.cols; ++i)
                    for (int j = 0; j < sm.cols; ++j)
                        if (static_cast<long long>(sm.gram(i, j)) != ex.expected_gram[i][j])
                            ok = false;
                if (e_format == "json") {
                    ordered_json j;
                    auto dump_matrix = [](auto get, int rows, int cols) {
                        ordered_json m = ordered_json::array();
                        for (int i = 0; i < rows; ++i) {
                            ordered_json row = ordered_json::array();
                            for (int c = 0; c < cols; ++c) row.push_back(get(i, c));
                            m.push_back(row);
                        }
                        return m;
                    };
                    j["A"] = dump_matrix([&](int i, int c) { return sm.entry(i, c); }, sm.rows,
                                         sm.cols);
                    j["gram"] = dump_matrix(
                        [&](int i, int c) { return static_cast<long long>(sm.gram(i, c)); },
                        sm.cols, sm.cols);
                    j["matches_reference"] = ok;
                    std::cout << j.dump(2) << "\n";
                } else {
                    std::cout << "stretching matrix A(E), rows = global cells:\n";
                    for (int i = 0; i < sm.rows; ++i) {
                        for (int j = 0; j < sm.cols; ++j) std::cout << ' ' << sm.entry(i, j);
                        std::cout << "\n";
                    }
                    std::cout << "gram A'A:\n";
                    for (int i = 0; i < sm.cols; ++i) {
                        for (int j = 0; j < sm.cols; ++j)
                            std::cout << ' ' << static_cast<long long>(sm.gram(i, j));
                        std::cout << "\n";
                    }
                    auto diag = spectral_diagnostics(sm);
                    std::cout << "lambda_min " << fmt17(diag.lambda_min) << " lambda_max "
                              << fmt17(diag.lambda_max) << " kappa " << fmt17(diag.condition)
                              << "\n";
                    std::cout << (ok ? "worked example matches the reference matrices"
                                     : "MISMATCH against the reference matrices")
                              << "\n";
                }
                if (!ok) return 1;
            } else if (e_action == "random") {
                Rng rng(g.seed);
                auto gen = generate_regime1(e_n, e_p, 1, 1.0, g.seed);
                auto ens = make_random_valid_ensemble(gen.data, e_T, e_max_leaves, 1, rng);
                auto gp = global_partition(ens, gen.data);
                auto sm = stretching_matrix(ens, gp);
                auto diag = spectral_diagnostics(sm);
                ordered_json j;
                j["T"] = ens.tree_count();
                j["total_leaves"] = ens.total_leaves();
                j["global_cells"] = gp.cell_count();
                j["lambda_min"] = diag.lambda_min;
                j["lambda_max"] = diag.lambda_max;
                j["kappa"] = diag.condition;
                j["gershgorin_bound"] = static_cast<double>(gp.cell_count()) * sm.cols;
                j["bound_holds"] =
                    diag.lambda_max * diag.lambda_max <=
                    static_cast<double>(gp.cell_count()) * sm.cols * (1.0 + 1e-9);
                std::cout << j.dump(2) << "\n";
            } else if (e_action == "decompose") {
                Rng rng(g.seed);
                const int khat = e_khat;
                if (khat < 2 || (khat & (khat - 1)) != 0)
                    throw std::runtime_error("decompose: khat must be a power of two >= 2");
                auto gen = generate_regime1(4 * khat, e_p, 1, 1.0, g.seed);
                const int s = static_cast<int>(std::log2(khat));
                auto kd = build_kd_tree(gen.data, std::vector<int>{0}, s);
                auto ens = decompose_kd_into_weak_learners(kd);
                auto gp = global_partition(ens, gen.data);
                auto sm = stretching_matrix(ens, gp);
                auto perm = identity_block_permutation(ens, gen.data, gp, sm);
                bool identity = true;
                for (int i = 0; i < gp.cell_count(); ++i)
                    if (sm.entry(i, perm[i]) != 1) identity = false;
                auto diag = spectral_diagnostics(sm);
                ordered_json j;
                j["khat"] = khat;
                j["T"] = ens.tree_count();
                j["leaves_per_tree"] = s + 1;
                j["global_equals_kd"] =
                    partition_signature(kd, gen.data) ==
                    [&] {
                        auto sig = gp.cells;
                        for (auto& gr : sig) std::sort(gr.begin(), gr.end());
                        std::sort(sig.begin(), sig.end(), [](const auto& a, const auto& b) {
                            return a.front() < b.front();
                        });
                        return sig;
                    }();
                j["identity_block"] = identity;
                j["lambda_min"] = diag.lambda_min;
                std::cout << j.dump(2) << "\n";
            } else {
                throw std::runtime_error("ensemble: unknown action " + e_action);
            }
        } else if (*prior_cmd) {
            const auto cfgj = g.config();
            PriorConfig prior = prior_from_config(cfgj);
            if (pr_action == "table") {
                std::cout << "value,log_density\n";
                if (pr_table == "q") {
                    for (int q = 0; q <= pr_p; ++q)
                        std::cout << q << ',' << fmt17(log_prior_q(q, pr_p, prior)) << "\n";
                } else if (pr_table == "K") {
                    PriorConfig t = prior;
                    if (t.K_max <= 0) t.K_max = t.effective_K_max(pr_n);
                    for (int K = 1; K <= t.K_max; ++K)
                        std::cout << K << ',' << fmt17(log_prior_K(K, t)) << "\n";
                } else if (pr_table == "T") {
                    for (int T = 1; T <= prior.effective_T_max(pr_n); ++T)
                        std::cout << T << ',' << fmt17(log_prior_T(T, pr_n, prior)) << "\n";
                } else if (pr_table == "gw") {
                    PriorConfig t = prior;
                    if (!t.gw_gamma) t.gw_gamma = 0.25;
                    const int cap = t.K_max > 0 ? t.K_max : 32;
                    t.K_max = cap;
                    for (int K = 1; K <= cap; ++K)
                        std::cout << K << ',' << fmt17(log_prior_K_galton_watson(K, t)) << "\n";
                } else {
                    throw std::runtime_error("prior: unknown table " + pr_table);
                }
            } else if (pr_action == "selftest") {
                // chi-square agreement between the ancestral sampler and the densities
                auto gen = generate_regime1(12, 2, 1, 1.0, g.seed);
                PriorConfig cfg;
                cfg.lambda = 2.0;
                cfg.a = 1.0;
                cfg.c = 1.0;
                cfg.K_max = 4;
                Rng rng(Rng::derive_seed(g.seed, 3));
                std::vector<long long> counts(gen.data.p() + 1, 0);
                const int draws = 20000;
                for (int i = 0; i < draws; ++i) {
                    auto st = sample_from_prior(cfg, gen.data, SamplerMode::Cart, rng);
                    ++counts[st.subsets[0].size()];
                }
                std::vector<double> expected(gen.data.p() + 1);
                for (int q = 0; q <= gen.data.p(); ++q)
                    expected[q] = std::exp(log_prior_q(q, gen.data.p(), cfg));
                const auto gof = chi_square_gof(counts, expected);
                std::cout << "subset-size chi-square p-value " << fmt17(gof.p_value) << "\n";
                if (gof.p_value <= 0.001) {
                    std::cout << "FAIL\n";
                    return 1;
                }
                std::cout << "ok\n";
            } else {
                throw std::runtime_error("prior: unknown action " + pr_action);
            }
        } else if (*sample_cmd) {
            auto data = load_or_fail(s_csv);
            const auto cfgj = g.config();
            PriorConfig prior = prior_from_config(cfgj);
            ChainConfig cc;
            cc.iterations = s_iterations;
            cc.burn_in = s_burn;
            cc.thinning = s_thin;
            cc.initial_trees = s_initial_trees;
            if (s_mode == "cart") {
                cc.mode = SamplerMode::Cart;
            } else if (s_mode == "forest-shared-s") {
                cc.mode = SamplerMode::ForestSharedS;
            } else if (s_mode == "forest-per-tree-s") {
                cc.mode = SamplerMode::ForestPerTreeS;
                cc.moves = MoveProbabilities::forest_default();
            } else {
                throw std::runtime_error("sample: unknown mode " + s_mode);
            }
            if (cc.mode != SamplerMode::Cart)
                prior.step_variance_mode = StepVarianceMode::OneOverT;
            if (cfgj.contains("chain")) {
                const auto& cj = cfgj.at("chain");
                cc.iterations = cj.value("iterations", cc.iterations);
                cc.burn_in = cj.value("burn_in", cc.burn_in);
                cc.thinning = cj.value("thinning", cc.thinning);
                cc.initial_trees = cj.value("initial_trees", cc.initial_trees);
            }
            std::vector<double> f0;
            if (!s_truth.empty()) {
                std::ifstream in(s_truth);
                if (!in) throw std::runtime_error("cannot open truth file " + s_truth);
                json tj;
                in >> tj;
                if (tj.is_object()) tj = tj.at("f0");
                f0 = tj.get<std::vector<double>>();
            }
            std::vector<ChainTrace> traces;
            for (int c = 0; c < s_chains; ++c) {
                cc.seed = Rng::derive_seed(g.seed, c);
                traces.push_back(cc.mode == SamplerMode::Cart
                                     ? run_cart_chain(data, prior, cc, f0)
                                     : run_forest_chain(data, prior, cc, f0));
            }
            auto trace = merge_traces(std::move(traces));
            fs::create_directories(g.out_dir);
            {
                std::ofstream out(fs::path(g.out_dir) / "trace.jsonl");
                for (const auto& s : trace.samples) {
                    ordered_json j;
                    j["q"] = s.q;
                    j["T"] = s.T;
                    j["K"] = s.K_total;
                    j["log_posterior"] = s.log_posterior;
                    if (!std::isnan(s.err_n)) j["err_n"] = s.err_n;
                    out << j.dump() << "\n";
                }
            }
            const auto summary = posterior_summaries(trace);
            ordered_json j;
            j["kept"] = trace.kept;
            j["acceptance_rate"] = trace.acceptance_rate();
            j["inclusion"] = summary.inclusion;
            ordered_json kj;
            for (const auto& [k, v] : summary.k_pmf) kj[std::to_string(k)] = v;
            j["k_pmf"] = kj;
            if (summary.has_error) {
                j["err_median"] = summary.err_median;
                j["err_q05"] = summary.err_q05;
                j["err_q95"] = summary.err_q95;
            }
            j["mean_fit"] = summary.mean_fit;
            std::ofstream out(fs::path(g.out_dir) / "summary.json");
            out << j.dump(2) << "\n";
            std::cout << "kept " << trace.kept << " draws; acceptance rate "
                      << fmt17(trace.acceptance_rate()) << "\n";
        } else if (*exp_cmd) {
            ExperimentPlan plan = plan_from_json(g.config_text());
            if (!x_scenario.empty()) plan.scenario = scenario_from_name(x_scenario);
            if (app.count("--seed")) plan.seed = g.seed;
            plan.threads = g.threads;
            const auto report = run_experiment(plan);
            emit_plot_data(report, g.out_dir);
            std::cout << report_to_json(report);
            if (x_require_pass && !report.passed()) return 1;
        } else if (*verify_cmd) {
            return run_verify();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

namespace {

int run_verify() {
    int failures = 0;
    auto report = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    // worked two-tree example, bit-exact
    {
        auto ex = worked_two_tree_example();
        auto gp = global_partition(ex.ensemble, ex.data);
        auto sm = stretching_matrix(ex.ensemble, gp);
        bool ok = gp.cell_count() == 7;
        for (int i = 0; ok && i < sm.rows; ++i)
            for (int j = 0; j < sm.cols; ++j)
                if (sm.entry(i, j) != ex.expected_a[i][j]) ok = false;
        for (int i = 0; ok && i < sm.cols; ++i)
            for (int j = 0; j < sm.cols; ++j)
                if (static_cast<long long>(sm.gram(i, j)) != ex.expected_gram[i][j]) ok = false;
        report("two-tree worked example reproduces A(E) and the Gram matrix", ok);
    }

    // partitioning-number recursion and brute-force domination
    {
        bool ok = true;
        for (int n = 1; n <= 12 && ok; ++n)
            for (int q = 1; q <= 4 && ok; ++q)
                for (int K = 2; K <= n && ok; ++K)
                    if (partitioning_number(n, q, K) !=
                        partitioning_number(n, q, K - 1) * (n - K + 2) * q)
                        ok = false;
        report("partitioning number satisfies its recursion (n <= 12, q <= 4)", ok);

        bool dominated = true;
        Rng rng(1234);
        for (int n = 3; n <= 6; ++n) {
            for (int p = 1; p <= 2; ++p) {
                std::vector<double> flat(static_cast<std::size_t>(n) * p);
                for (auto& v : flat) v = rng.uniform();
                Dataset data(std::move(flat), std::vector<double>(n, 0.0), n, p);
                for (int q = 1; q <= p; ++q) {
                    std::vector<int> subset;
                    for (int j = 0; j < q; ++j) subset.push_back(j);
                    for (int K = 1; K <= std::min(4, n); ++K) {
                        const auto parts = enumerate_valid_trees(data, subset, K, 1);
                        if (BigInt(static_cast<long long>(parts.size())) >
                            partitioning_number(n, q, K))
                            dominated = false;
                    }
                }
            }
        }
        report("distinct valid partitions never exceed the partitioning number", dominated);
    }

    // eigenvalue bound on random ensembles
    {
        Rng rng(99);
        bool ok = true;
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 10 + static_cast<int>(rng.uniform_int(41));
            const int p = 1 + static_cast<int>(rng.uniform_int(3));
            const int T = 1 + static_cast<int>(rng.uniform_int(5));
            std::vector<double> flat(static_cast<std::size_t>(n) * p);
            for (auto& v : flat) v = rng.uniform();
            Dataset data(std::move(flat), std::vector<double>(n, 0.0), n, p);
            auto ens = make_random_valid_ensemble(data, T, 6, 1, rng);
            auto gp = global_partition(ens, data);
            auto sm = stretching_matrix(ens, gp);
            auto diag = spectral_diagnostics(sm);
            if (diag.lambda_max * diag.lambda_max >
                static_cast<double>(gp.cell_count()) * sm.cols * (1.0 + 1e-9))
                ok = false;
        }
        report("lambda_max^2 <= K(E) * T * Kbar on random valid ensembles", ok);
    }

    // weak-learner decomposition
    {
        Rng rng(7);
        bool ok = true;
        for (int khat : {4, 8, 16}) {
            const int n = 4 * khat;
            std::vector<double> flat(static_cast<std::size_t>(n) * 2);
            for (auto& v : flat) v = rng.uniform();
            Dataset data(std::move(flat), std::vector<double>(n, 0.0), n, 2);
            const int s = static_cast<int>(std::log2(khat));
            auto kd = build_kd_tree(data, std::vector<int>{0}, s);
            auto ens = decompose_kd_into_weak_learners(kd);
            auto gp = global_partition(ens, data);
            auto sig = gp.cells;
            for (auto& gr : sig) std::sort(gr.begin(), gr.end());
            std::sort(sig.begin(), sig.end(),
                      [](const auto& a, const auto& b) { return a.front() < b.front(); });
            if (sig != partition_signature(kd, data)) ok = false;
            auto sm = stretching_matrix(ens, gp);
            auto perm = identity_block_permutation(ens, data, gp, sm);
            for (int i = 0; i < gp.cell_count(); ++i)
                if (sm.entry(i, perm[i]) != 1) ok = false;
            auto diag = spectral_diagnostics(sm);
            if (diag.lambda_min < 1.0 - 1e-9) ok = false;
        }
        report("k-d trees decompose into weak learners with an identity block", ok);
    }

    // conjugate marginal likelihood against quadrature
    {
        Rng rng(55);
        bool ok = true;
        for (int trial = 0; trial < 20; ++trial) {
            const int nk = 1 + static_cast<int>(rng.uniform_int(6));
            const double v = 0.25 + rng.uniform();
            std::vector<double> r(nk);
            double s = 0.0, q = 0.0;
            for (auto& x : r) {
                x = 1.5 * rng.normal();
                s += x;
                q += x * x;
            }
            if (std::abs(cell_log_marginal(nk, s, q, v) - cell_log_marginal_quadrature(r, v)) >
                1e-8)
                ok = false;
        }
        report("closed-form cell marginals agree with quadrature to 1e-8", ok);
    }

    std::cout << (failures == 0 ? "verify: all checks passed"
                                : "verify: " + std::to_string(failures) + " check(s) failed")
              << "\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace
