/// @file bench_retrieval.cpp
/// Evidence index construction and BM25 queries.

#include <random>

#include <benchmark/benchmark.h>

#include "phasetrace/retrieval.hpp"

using namespace phasetrace;

namespace {

std::vector<EnrichedEvent> random_posts(std::size_t n) {
    static const char* words[] = {"sleep", "work", "tired", "friends", "walk", "music", "anxious", "better",
                                  "family", "doctor", "rain", "weekend", "coffee", "late", "quiet", "game"};
    std::mt19937_64 rng(4);
    std::vector<EnrichedEvent> out(n);
    const Timestamp start{std::chrono::seconds{1'400'000'000}};
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (int w = 0; w < 12 + static_cast<int>(rng() % 20); ++w) {
            text += words[rng() % std::size(words)];
            text += ' ';
        }
        out[i].event = {"bench", start + std::chrono::hours{static_cast<long>(i) * 7}, "forum", text};
    }
    return out;
}

void BM_BuildIndex(benchmark::State& state) {
    const auto posts = random_posts(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(EvidenceIndex::build("bench", posts, {}, {}, {}));
}
BENCHMARK(BM_BuildIndex)->Arg(1000)->Arg(10000);

void BM_Query(benchmark::State& state) {
    const auto posts = random_posts(static_cast<std::size_t>(state.range(0)));
    const auto index = EvidenceIndex::build("bench", posts, {}, {}, {});
    Query q{"tired after work and could not sleep"};
    for (auto _ : state) benchmark::DoNotOptimize(index.query(q));
}
BENCHMARK(BM_Query)->Arg(1000)->Arg(10000);

}  // namespace
