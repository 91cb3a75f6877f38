/// @file bench_segmentation.cpp
/// Top-down and fixed-window segmentation over random daily series.

#include <random>

#include <benchmark/benchmark.h>

#include "phasetrace/segmentation.hpp"

using namespace phasetrace;

namespace {

DailySeries random_series(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> y(0.0, 2.0);
    DailySeries s;
    s.user_id = "bench";
    const Date start = Date{std::chrono::days{16000}};
    int x = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = y(rng);
        s.points.push_back({start + std::chrono::days{x}, x, v, v, 1});
        x += 1 + static_cast<int>(rng() % 4);
    }
    return s;
}

void BM_TopDown(benchmark::State& state) {
    const auto series = random_series(static_cast<std::size_t>(state.range(0)), 1);
    const SegmentOptions params{static_cast<std::size_t>(state.range(1)), 0.001};
    for (auto _ : state) benchmark::DoNotOptimize(topdown_segment(series, params));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TopDown)->ArgsProduct({{100, 1000, 10000}, {10}})->Args({1000, 50})->Complexity();

void BM_FixedWindow(benchmark::State& state) {
    const auto series = random_series(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(fixed_window_segment(series, {10, 0.001}));
}
BENCHMARK(BM_FixedWindow)->Arg(1000)->Arg(10000);

}  // namespace
