#include <benchmark/benchmark.h>

#include "spikeforest/ensemble.hpp"
#include "spikeforest/test_function.hpp"

namespace {

using namespace spikeforest;

void global_partition_and_gram(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    auto gen = generate_regime1(500, 4, 2, 1.0, 11);
    Rng rng(3);
    auto ens = make_random_valid_ensemble(gen.data, T, 6, 1, rng);
    for (auto _ : state) {
        auto gp = global_partition(ens, gen.data);
        auto sm = stretching_matrix(ens, gp);
        benchmark::DoNotOptimize(sm.gram(0, 0));
    }
}

void spectral_solve(benchmark::State& state) {
    const int T = static_cast<int>(state.range(0));
    auto gen = generate_regime1(500, 4, 2, 1.0, 11);
    Rng rng(3);
    auto ens = make_random_valid_ensemble(gen.data, T, 6, 1, rng);
    auto sm = stretching_matrix(ens, gen.data);
    for (auto _ : state) {
        auto diag = spectral_diagnostics(sm);
        benchmark::DoNotOptimize(diag.lambda_max);
    }
}

BENCHMARK(global_partition_and_gram)->Arg(2)->Arg(5)->Arg(10);
BENCHMARK(spectral_solve)->Arg(2)->Arg(5)->Arg(10);

}  // namespace
