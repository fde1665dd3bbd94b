#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spikeforest/mcmc.hpp"
#include "spikeforest/test_function.hpp"

namespace spikeforest {

enum class Scenario { ApproxRate, ConcentrationR1, ConcentrationR2, OverfitProbe, Selection };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct ExperimentPlan {
    Scenario scenario = Scenario::OverfitProbe;
    std::uint64_t seed = 17;
    int threads = 1;

    // data generation
    std::vector<int> n_grid = {100, 250, 500, 1000};
    int p = 10;
    int q0 = 2;
    double alpha = 1.0;
    double scale = 2.5;  // scale of the built-in truth; Holder norm follows
    std::vector<Regime2Component> components;  // regime-2 scenarios
    int replications = 8;

    // chains
    int chains = 2;
    PriorConfig prior;
    ChainConfig chain;

    // approx-rate scenario
    int s_max = 6;
    int approx_q = 1;
    double approx_alpha = 1.0;
    int approx_n = 1024;
    bool approx_linear = true;  // identity truth on [0,1]; else the Holder family

    // probes and tolerances
    double overfit_ck = 4.0;
    double overfit_ceiling = 0.1;
    double slope_tolerance = 0.15;
    double selection_active_floor = 0.8;
    double selection_inactive_ceiling = 0.2;
    bool preflight = true;  // enumeration gate before long runs

    void validate() const;
};

struct GridRecord {
    double grid = 0.0;      // n, or K for approx-rate
    int replication = -1;   // -1 for aggregated rows
    std::string statistic;
    double value = 0.0;
};

struct ExperimentReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<GridRecord> records;
    std::map<std::string, double> slopes;
    std::map<std::string, double> slope_stderr;
    std::map<std::string, bool> checks;

    bool passed() const;
    double record_value(double grid, const std::string& statistic) const;
};

ExperimentReport run_approx_rate(const ExperimentPlan& plan);
ExperimentReport run_concentration(const ExperimentPlan& plan);
ExperimentReport run_overfit_probe(const ExperimentPlan& plan);
ExperimentReport run_selection(const ExperimentPlan& plan);
ExperimentReport run_experiment(const ExperimentPlan& plan);

// Tidy CSV (one row per grid point per statistic) plus a compact JSON with
// the fitted slopes and checks. Returns the two file paths written.
std::vector<std::string> emit_plot_data(const ExperimentReport& report,
                                        const std::string& out_dir);

std::string report_to_json(const ExperimentReport& report);
ExperimentPlan plan_from_json(const std::string& json_text);

// Enumeration-versus-chain agreement gate on a tiny instance; throws on
// failure. Scenario runners call this before committing to long runs.
void preflight_enumeration_gate(std::uint64_t seed);

}  // namespace spikeforest
