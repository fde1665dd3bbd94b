// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1-6 are oracle- and invariant-based; 7-9 are desk-scale
// statistical probes; 10 checks byte-level determinism of the CLI.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

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
using namespace spikeforest;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), dt, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

Dataset random_dataset(int n, int p, Rng& rng) {
    std::vector<double> flat(static_cast<std::size_t>(n) * p);
    for (auto& v : flat) v = rng.uniform();
    return Dataset(std::move(flat), std::vector<double>(n, 0.0), n, p);
}

// ---------------------------------------------------------------- chains

double instance_p_value(const Dataset& data, const PriorConfig& prior, std::uint64_t seed) {
    EnumerationCaps caps{data.n(), data.p(), prior.K_max, 1000000};
    const auto exact = exact_posterior_enumeration(data, prior, caps);
    ChainConfig cfg;
    cfg.iterations = 6000000;
    cfg.burn_in = 600000;
    cfg.thinning = 300;  // near-independent draws; mode dwell times are long
    cfg.seed = seed;
    cfg.record_states = true;
    cfg.record_fit = false;
    const auto trace = run_cart_chain(data, prior, cfg);
    std::map<std::string, long long> counts;
    for (const auto& k : trace.state_keys) ++counts[k];
    std::vector<long long> observed;
    std::vector<double> expected;
    for (const auto& st : exact.states) {
        expected.push_back(st.probability);
        observed.push_back(counts.count(st.key) ? counts.at(st.key) : 0);
        counts.erase(st.key);
    }
    if (!counts.empty()) return 0.0;  // off-support states visited
    return chi_square_gof(observed, expected).p_value;
}

// ----------------------------------------------------------- determinism

struct CliRun {
    std::string stdout_text;
    std::map<std::string, std::string> files;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliRun run_cli(const std::string& args, const fs::path& out_dir) {
    fs::remove_all(out_dir);
    fs::create_directories(out_dir);
    const fs::path stdout_file = out_dir / "__stdout.txt";
    const std::string cmd = std::string(SPIKEFOREST_CLI_PATH) + " " + args + " > " +
                            stdout_file.string() + " 2> /dev/null";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw std::runtime_error("cli failed: " + cmd);
    CliRun run;
    run.stdout_text = slurp(stdout_file);
    fs::remove(stdout_file);
    for (const auto& entry : fs::recursive_directory_iterator(out_dir))
        if (entry.is_regular_file())
            run.files[fs::relative(entry.path(), out_dir).string()] = slurp(entry.path());
    return run;
}

bool identical_runs(const std::string& args_template, const fs::path& base,
                    std::string& detail) {
    // both executions target the same directory so path-bearing output is
    // comparable; the directory is wiped between runs
    const fs::path dir = base / "run";
    auto fill = [&] {
        std::string args = args_template;
        const std::string token = "{OUT}";
        for (std::size_t at = args.find(token); at != std::string::npos;
             at = args.find(token))
            args.replace(at, token.size(), dir.string());
        return run_cli(args, dir);
    };
    const auto ra = fill();
    const auto rb = fill();
    if (ra.stdout_text != rb.stdout_text) {
        detail += " stdout differs for: " + args_template;
        return false;
    }
    if (ra.files.size() != rb.files.size()) {
        detail += " file sets differ for: " + args_template;
        return false;
    }
    for (const auto& [name, bytes] : ra.files) {
        if (!rb.files.count(name) || rb.files.at(name) != bytes) {
            detail += " file " + name + " differs for: " + args_template;
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    std::printf("spike-and-forest acceptance suite\n");

    criterion(1, "worked two-tree example reproduces A(E) and its Gram exactly",
              [](std::string&) {
                  auto ex = worked_two_tree_example();
                  auto gp = global_partition(ex.ensemble, ex.data);
                  if (gp.cell_count() != 7) return false;
                  auto sm = stretching_matrix(ex.ensemble, gp);
                  if (sm.rows != 7 || sm.cols != 6) return false;
                  for (int i = 0; i < 7; ++i)
                      for (int j = 0; j < 6; ++j)
                          if (sm.entry(i, j) != ex.expected_a[i][j]) return false;
                  for (int i = 0; i < 6; ++i)
                      for (int j = 0; j < 6; ++j)
                          if (static_cast<long long>(sm.gram(i, j)) != ex.expected_gram[i][j])
                              return false;
                  return true;
              });

    criterion(2, "partitioning-number recursion and brute-force domination",
              [](std::string&) {
                  for (int n = 1; n <= 12; ++n)
                      for (int q = 1; q <= 4; ++q)
                          for (int K = 2; K <= n; ++K)
                              if (partitioning_number(n, q, K) !=
                                  partitioning_number(n, q, K - 1) * (n - K + 2) * q)
                                  return false;
                  Rng rng(4242);
                  for (int n = 3; n <= 6; ++n)
                      for (int p = 1; p <= 2; ++p)
                          for (int rep = 0; rep < 2; ++rep) {
                              auto data = random_dataset(n, p, rng);
                              for (int q = 1; q <= p; ++q) {
                                  std::vector<int> subset;
                                  for (int j = 0; j < q; ++j) subset.push_back(j);
                                  for (int K = 1; K <= std::min(4, n); ++K) {
                                      const auto parts =
                                          enumerate_valid_trees(data, subset, K, 1);
                                      if (BigInt(static_cast<long long>(parts.size())) >
                                          partitioning_number(n, q, K))
                                          return false;
                                  }
                              }
                          }
                  return true;
              });

    criterion(3, "lambda_max^2 <= K(E) * T * Kbar on 1000 random valid ensembles",
              [](std::string& detail) {
                  Rng rng(991);
                  int violations = 0;
                  for (int trial = 0; trial < 1000; ++trial) {
                      const int n = 10 + static_cast<int>(rng.uniform_int(41));
                      const int p = 1 + static_cast<int>(rng.uniform_int(3));
                      const int T = 1 + static_cast<int>(rng.uniform_int(5));
                      auto data = random_dataset(n, p, rng);
                      auto ens = make_random_valid_ensemble(data, T, 6, 1, rng);
                      auto gp = global_partition(ens, data);
                      auto sm = stretching_matrix(ens, gp);
                      auto diag = spectral_diagnostics(sm);
                      const double bound = static_cast<double>(gp.cell_count()) * sm.cols;
                      if (diag.lambda_max * diag.lambda_max > bound * (1.0 + 1e-9))
                          ++violations;
                  }
                  detail = "violations " + std::to_string(violations) + "/1000";
                  return violations == 0;
              });

    criterion(4, "weak-learner decomposition: partition equality, identity block, lambda_min",
              [](std::string&) {
                  Rng rng(71);
                  for (int khat : {4, 8, 16}) {
                      const int n = 4 * khat;
                      auto data = random_dataset(n, 2, rng);
                      const int s = static_cast<int>(std::log2(khat));
                      auto kd = build_kd_tree(data, std::vector<int>{0}, s);
                      auto ens = decompose_kd_into_weak_learners(kd);
                      if (ens.tree_count() != khat / 2) return false;
                      auto gp = global_partition(ens, data);
                      auto sig = gp.cells;
                      for (auto& g : sig) std::sort(g.begin(), g.end());
                      std::sort(sig.begin(), sig.end(), [](const auto& a, const auto& b) {
                          return a.front() < b.front();
                      });
                      if (sig != partition_signature(kd, data)) return false;
                      auto sm = stretching_matrix(ens, gp);
                      auto perm = identity_block_permutation(ens, data, gp, sm);
                      for (int i = 0; i < gp.cell_count(); ++i) {
                          if (sm.entry(i, perm[i]) != 1) return false;
                          for (int r = 0; r < gp.cell_count(); ++r)
                              if (r != i && sm.entry(r, perm[i]) != 0) return false;
                      }
                      auto diag = spectral_diagnostics(sm);
                      if (diag.lambda_min < 1.0 - 1e-9) return false;
                  }
                  return true;
              });

    criterion(5, "k-d projection rates and the diameter bound", [](std::string& detail) {
        ExperimentPlan linear;
        linear.scenario = Scenario::ApproxRate;
        linear.approx_q = 1;
        linear.approx_alpha = 1.0;
        linear.approx_n = 1024;
        linear.s_max = 6;
        linear.approx_linear = true;
        const auto rl = run_approx_rate(linear);
        const double slope1 = rl.slopes.at("projection_error");
        if (std::abs(slope1 + 1.0) > 0.02 || !rl.checks.at("bound_respected")) {
            detail = "identity slope " + std::to_string(slope1);
            return false;
        }

        ExperimentPlan rough;
        rough.scenario = Scenario::ApproxRate;
        rough.approx_q = 2;
        rough.approx_alpha = 0.5;
        rough.approx_n = 1024;
        rough.s_max = 4;
        rough.approx_linear = false;
        rough.scale = 1.0;
        const auto rr = run_approx_rate(rough);
        const double slope2 = rr.slopes.at("projection_error");
        detail = "slopes " + std::to_string(slope1) + ", " + std::to_string(slope2);
        return slope2 <= -0.25 + 0.1 && rr.checks.at("bound_respected");
    });

    criterion(6, "sampler exactness: chain-vs-enumeration chi-square and quadrature",
              [](std::string& detail) {
                  PriorConfig prior;
                  prior.lambda = 2.0;
                  prior.K_max = 3;
                  struct Instance {
                      int n, p;
                      std::uint64_t data_seed;
                  };
                  const std::vector<Instance> instances = {{5, 1, 31}, {6, 2, 32}, {4, 2, 37}};
                  for (const auto& inst : instances) {
                      auto gen = generate_regime1(inst.n, inst.p, 1, 1.0, inst.data_seed,
                                                  DesignKind::IidUniform, 1.5);
                      int pass = 0;
                      for (std::uint64_t seed = 1; seed <= 20; ++seed)
                          if (instance_p_value(gen.data, prior, seed) > 0.01) ++pass;
                      detail += "n=" + std::to_string(inst.n) + ",p=" +
                                std::to_string(inst.p) + ": " + std::to_string(pass) + "/20 ";
                      if (pass < 19) return false;
                  }

                  // closed-form marginal versus quadrature on 100 random trees
                  Rng rng(808);
                  for (int trial = 0; trial < 100; ++trial) {
                      const int n = 8 + static_cast<int>(rng.uniform_int(20));
                      auto data = random_dataset(n, 2, rng);
                      std::vector<double> y(n);
                      for (auto& v : y) v = 1.5 * rng.normal();
                      auto ens = make_random_valid_ensemble(data, 1, 5, 1, rng);
                      const double v = 0.3 + rng.uniform();
                      const auto members = ens.trees[0].assign(data);
                      double closed_total = 0.0, quad_total = 0.0;
                      bool ok = true;
                      for (const auto& cell : members) {
                          std::vector<double> r;
                          double s = 0.0, q = 0.0;
                          for (int i : cell) {
                              r.push_back(y[i]);
                              s += y[i];
                              q += y[i] * y[i];
                          }
                          const double closed =
                              cell_log_marginal(static_cast<int>(cell.size()), s, q, v);
                          const double quad = cell_log_marginal_quadrature(r, v);
                          if (std::abs(closed - quad) > 1e-8) ok = false;
                          closed_total += closed;
                          quad_total += quad;
                      }
                      if (!ok || std::abs(closed_total - quad_total) > 1e-7) return false;
                  }
                  return true;
              });

    criterion(7, "regime-1 probe: leaf-count tail mass and error slope", [](std::string& detail) {
        ExperimentPlan plan;
        plan.scenario = Scenario::OverfitProbe;
        plan.seed = 20260809;
        plan.n_grid = {100, 250, 500, 1000};
        plan.p = 10;
        plan.q0 = 2;
        plan.alpha = 1.0;
        plan.scale = 5.0 / std::sqrt(2.0);  // Holder norm 5
        plan.replications = 8;
        plan.chains = 2;
        plan.chain.iterations = 24000;
        plan.overfit_ck = 4.0;
        plan.overfit_ceiling = 0.1;
        plan.slope_tolerance = 0.15;
        const auto rep = run_overfit_probe(plan);
        detail = "slope " + std::to_string(rep.slopes.at("cart_median_err")) + ", mass(n=1000) " +
                 std::to_string(rep.record_value(1000, "k_mass"));
        return rep.passed();
    });

    criterion(8, "regime-2 probe: additive forest beats single-tree CART", [](std::string& detail) {
        ExperimentPlan plan;
        plan.scenario = Scenario::ConcentrationR2;
        plan.seed = 20260810;
        plan.n_grid = {250, 500, 1000};
        plan.p = 10;
        plan.alpha = 1.0;
        plan.components = {{1, 1.0, 2.5}, {1, 1.0, 2.5}};
        plan.replications = 8;
        plan.chains = 2;
        plan.chain.iterations = 24000;
        plan.chain.initial_trees = 10;
        const auto rep = run_concentration(plan);
        detail = "forest wins " +
                 std::to_string(static_cast<int>(rep.record_value(1000, "forest_wins"))) +
                 "/8; errs " + std::to_string(rep.record_value(1000, "forest_median_err")) +
                 " vs " + std::to_string(rep.record_value(1000, "cart_median_err"));
        return rep.checks.at("forest_beats_cart_at_max_n");
    });

    criterion(9, "variable selection: inclusion thresholds at n=500", [](std::string& detail) {
        ExperimentPlan plan;
        plan.scenario = Scenario::Selection;
        plan.seed = 20260811;
        plan.n_grid = {500};
        plan.p = 10;
        plan.q0 = 2;
        plan.alpha = 1.0;
        plan.scale = 5.0 / std::sqrt(2.0);
        plan.replications = 8;
        plan.chains = 2;
        plan.chain.iterations = 60000;
        plan.selection_active_floor = 0.8;
        plan.selection_inactive_ceiling = 0.2;
        const auto rep = run_selection(plan);
        detail = "tpr " + std::to_string(rep.record_value(500, "tpr")) + " fpr " +
                 std::to_string(rep.record_value(500, "fpr"));
        return rep.passed();
    });

    criterion(10, "CLI byte-level determinism", [](std::string& detail) {
        const fs::path base = fs::temp_directory_path() / "spikeforest_acceptance";
        fs::remove_all(base);
        fs::create_directories(base);

        // a dataset reused by the later commands
        const fs::path data_dir = base / "data";
        run_cli("data generate --n 60 --p 3 --q0 1 --scale 4 --seed 11 --out " +
                    data_dir.string(),
                data_dir);
        const std::string csv = (data_dir / "data.csv").string();

        const fs::path plan_path = base / "plan.json";
        {
            std::ofstream plan(plan_path);
            plan << R"({"scenario":"approx-rate","approx_n":64,"s_max":4})";
        }

        bool ok = true;
        ok = ok && identical_runs("data generate --n 60 --p 3 --q0 1 --seed 11 --out {OUT}",
                                  base / "gen", detail);
        ok = ok && identical_runs("partition kd-build --csv " + csv +
                                      " --subset 1 --rounds 2",
                                  base / "kd", detail);
        ok = ok && identical_runs("partition enumerate --csv " + csv + " --subset 1 --K 3",
                                  base / "enum", detail);
        ok = ok && identical_runs("prior table --table K --p 5 --n 40", base / "prior", detail);
        ok = ok && identical_runs("ensemble figure2 --format json", base / "fig2", detail);
        ok = ok && identical_runs("sample --csv " + csv +
                                      " --iterations 3000 --chains 2 --seed 5 --out {OUT}",
                                  base / "sample", detail);
        ok = ok && identical_runs("experiment --config " + plan_path.string() +
                                      " --seed 3 --out {OUT}",
                                  base / "exp", detail);
        ok = ok && identical_runs("verify", base / "verify", detail);
        fs::remove_all(base);
        return ok;
    });

    std::printf("%s: %d criterion(s) failed\n",
                g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", g_failures);
    return g_failures == 0 ? 0 : 1;
}
