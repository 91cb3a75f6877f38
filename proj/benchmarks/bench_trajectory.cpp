/// @file bench_trajectory.cpp
/// Daily aggregation and moving-average smoothing.

#include <random>

#include <benchmark/benchmark.h>

#include "phasetrace/trajectory.hpp"

using namespace phasetrace;

namespace {

std::vector<EnrichedEvent> random_events(std::size_t n) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> score(0.0, 2.0);
    std::vector<EnrichedEvent> out(n);
    const Timestamp start{std::chrono::seconds{1'400'000'000}};
    for (std::size_t i = 0; i < n; ++i) {
        out[i].event = {"bench", start + std::chrono::seconds{static_cast<long>(rng() % (86400L * 365 * 3))}, "forum",
                        "text"};
        out[i].score = score(rng);
    }
    return out;
}

void BM_AggregateDaily(benchmark::State& state) {
    const auto events = random_events(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_daily(events));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AggregateDaily)->Arg(1000)->Arg(100000);

void BM_Smooth(benchmark::State& state) {
    const auto series = aggregate_daily(random_events(20000));
    const int window = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(smooth(series, window));
}
BENCHMARK(BM_Smooth)->Arg(1)->Arg(7)->Arg(31);

}  // namespace
