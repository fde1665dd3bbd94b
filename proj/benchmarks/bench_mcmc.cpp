#include <benchmark/benchmark.h>

#include "spikeforest/mcmc.hpp"
#include "spikeforest/test_function.hpp"

namespace {

using namespace spikeforest;

void cart_chain_iterations(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto gen = generate_regime1(n, 10, 2, 1.0, 42, DesignKind::IidUniform, 3.5);
    ChainConfig cfg;
    cfg.iterations = 4000;
    cfg.seed = 7;
    cfg.record_fit = false;
    for (auto _ : state) {
        auto trace = run_cart_chain(gen.data, PriorConfig{}, cfg);
        benchmark::DoNotOptimize(trace.kept);
    }
    state.SetItemsProcessed(state.iterations() * cfg.iterations);
}

void forest_sweeps(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<Regime2Component> comps = {{1, 1.0, 2.5}, {1, 1.0, 2.5}};
    auto gen = generate_regime2(n, 10, comps, 42);
    ChainConfig cfg;
    cfg.iterations = 1000;
    cfg.seed = 7;
    cfg.mode = SamplerMode::ForestPerTreeS;
    cfg.moves = MoveProbabilities::forest_default();
    cfg.initial_trees = 10;
    cfg.record_fit = false;
    PriorConfig prior;
    prior.step_variance_mode = StepVarianceMode::OneOverT;
    for (auto _ : state) {
        auto trace = run_forest_chain(gen.data, prior, cfg);
        benchmark::DoNotOptimize(trace.kept);
    }
    state.SetItemsProcessed(state.iterations() * cfg.iterations);
}

BENCHMARK(cart_chain_iterations)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(forest_sweeps)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
