// Shared test fixtures: event/series builders, random generators, temp dirs.

#pragma once

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/ingestion.hpp"
#include "phasetrace/time.hpp"
#include "phasetrace/trajectory.hpp"

namespace pt_test {

using namespace phasetrace;

inline Timestamp ts(const std::string& text) {
    auto t = parse_timestamp(text);
    if (!t) throw std::runtime_error("bad fixture timestamp " + text);
    return *t;
}

inline Date day(const std::string& text) {
    auto d = parse_date(text);
    if (!d) throw std::runtime_error("bad fixture date " + text);
    return *d;
}

inline Date base_day() { return day("2020-01-01"); }

/// Depression distribution whose default-weight score is `s` in [0, 2].
inline ClassDistribution severity(double s) {
    if (s <= 1.0) return {"depression", {{"no", 1.0 - s}, {"moderate", s}, {"severe", 0.0}}};
    return {"depression", {{"no", 0.0}, {"moderate", 2.0 - s}, {"severe", s - 1.0}}};
}

inline Event event(const std::string& user, Timestamp when, const std::string& text = "some text",
                   const std::string& source = "forum") {
    return {user, when, source, text};
}

/// Enriched event `day_offset` days after base_day() at `second` past midnight.
inline EnrichedEvent enriched(const std::string& user, int day_offset, double score, int second = 43200,
                              const std::string& text = "some text") {
    EnrichedEvent e;
    e.event = event(user, Timestamp{base_day() + std::chrono::days{day_offset}} + std::chrono::seconds{second}, text);
    e.distributions.push_back(severity(score));
    e.score = score;
    return e;
}

/// Series with raw = smoothed = ys at day offsets xs.
inline DailySeries series(const std::vector<int>& xs, const std::vector<double>& ys, const std::string& user = "u") {
    DailySeries s;
    s.user_id = user;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s.points.push_back({base_day() + std::chrono::days{xs[i]}, xs[i], ys[i], ys[i], 1});
    }
    return s;
}

/// Strictly increasing offsets starting at 0 with gaps in [1, max_gap].
inline std::vector<int> random_offsets(std::mt19937_64& rng, std::size_t n, int max_gap = 5) {
    std::uniform_int_distribution<int> gap(1, max_gap);
    std::vector<int> xs(n);
    for (std::size_t i = 1; i < n; ++i) xs[i] = xs[i - 1] + gap(rng);
    return xs;
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> ys(n);
    for (auto& y : ys) y = u(rng);
    return ys;
}

/// Random distribution over the default depression classes.
inline ClassDistribution random_distribution(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double a = u(rng), b = u(rng), c = u(rng);
    // Occasional one-hot and zero entries exercise the edges.
    switch (rng() % 8) {
        case 0: a = 1, b = 0, c = 0; break;
        case 1: a = 0, b = 0, c = 1; break;
        case 2: b = 0; break;
        default: break;
    }
    const double t = a + b + c;
    return {"depression", {{"no", a / t}, {"moderate", b / t}, {"severe", c / t}}};
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("phasetrace-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace pt_test
