#include <benchmark/benchmark.h>

#include "spikeforest/kd.hpp"
#include "spikeforest/marginal.hpp"
#include "spikeforest/test_function.hpp"

namespace {

using namespace spikeforest;

void kd_build(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto gen = generate_regime1(n, 2, 2, 1.0, 5);
    std::vector<int> subset = {0, 1};
    for (auto _ : state) {
        auto kd = build_kd_tree(gen.data, subset, 3);
        benchmark::DoNotOptimize(kd.leaf_count());
    }
}

void marginal_likelihood(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto gen = generate_regime1(n, 2, 1, 1.0, 5, DesignKind::IidUniform, 2.0);
    auto kd = build_kd_tree(gen.data, std::vector<int>{0}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            log_marginal_likelihood_tree(kd, gen.data, gen.data.y(), 1.0));
    }
}

BENCHMARK(kd_build)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(marginal_likelihood)->Arg(256)->Arg(1024);

}  // namespace
