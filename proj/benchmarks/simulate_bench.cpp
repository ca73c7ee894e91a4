#include <benchmark/benchmark.h>

#include "clustre/criterion.hpp"
#include "clustre/hawkes.hpp"

namespace {

using namespace clustre;

HawkesParams reference() { return HawkesParams(1.0, 1.0, 2.0, ImpactSpec::linear(1.0), MarkLaw::exponential(1.0)); }

void BM_SimulatePath(benchmark::State& state) {
    const HawkesParams p = reference();
    const double horizon = static_cast<double>(state.range(0));
    std::uint64_t seed = 1;
    std::size_t events = 0;
    for (auto _ : state) {
        const EventPath path = simulate_path(p, horizon, seed++);
        events += path.events.size();
        benchmark::DoNotOptimize(path.terminal_intensity);
    }
    state.SetItemsProcessed(static_cast<int64_t>(events));
}
BENCHMARK(BM_SimulatePath)->Arg(1)->Arg(10)->Arg(100);

void BM_SimulateBatch(benchmark::State& state) {
    const HawkesParams p = reference();
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        double total = 0.0;
        simulate_batch(p, 1.0, 7, n, [&](std::size_t, const EventPath& path) {
            benchmark::DoNotOptimize(total += static_cast<double>(path.events.size()));
        });
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateBatch)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_McEstimate(benchmark::State& state) {
    const HawkesParams p = reference();
    const EconomicParams e{10.0, 0.3, 2.0, 0.5, 1.0};
    const Contract c = Contract::three_piece(0.3, 4.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mc_estimate(c, e, p, static_cast<std::size_t>(state.range(0)), 11).utility);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McEstimate)->Arg(10000)->Unit(benchmark::kMillisecond);

} // namespace
