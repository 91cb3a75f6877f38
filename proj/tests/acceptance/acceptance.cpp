/// @file acceptance.cpp
/// One PASS/FAIL line per acceptance criterion, each under its time budget.
/// Exit status is nonzero when any line fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "backends.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "phasetrace/enrichment.hpp"
#include "phasetrace/evaluation.hpp"
#include "phasetrace/http_backends.hpp"
#include "phasetrace/likert.hpp"
#include "phasetrace/pipeline.hpp"
#include "phasetrace/segmentation.hpp"
#include "phasetrace/serialization.hpp"
#include "phasetrace/store.hpp"
#include "phasetrace/trajectory.hpp"
#include "store_helpers.hpp"

using namespace phasetrace;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && budget_seconds > 0 && secs >= budget_seconds) {
        ok = false;
        detail = fmt::format("took {:.3f}s, limit {:.0f}s", secs, budget_seconds);
    }
    if (!ok) ++failures;
    std::printf("%s  %-34s %7.3fs  %s\n", ok ? "PASS" : "FAIL", name.c_str(), secs, detail.c_str());
    std::fflush(stdout);
}

std::vector<IndexRange> ranges_of(const Segmentation& s) {
    std::vector<IndexRange> out;
    for (const auto& seg : s.segments) out.push_back({seg.first, seg.last});
    return out;
}

std::vector<double> grid_values(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> ys(n);
    for (auto& y : ys) y = static_cast<double>(rng() % 2049) / 1024.0;
    return ys;
}

Timeline days_timeline(int days) {
    Timeline t{"u", {}};
    for (int i = 0; i < days; ++i) {
        t.events.push_back(pt_test::event(
            "u", Timestamp{pt_test::base_day() + std::chrono::days{i}} + std::chrono::hours{10}, "entry " + std::to_string(i)));
    }
    return t;
}

pt_test::FunctionClassifier zigzag() {
    return pt_test::FunctionClassifier([](const Event& e) {
        const long d = (to_date(e.timestamp) - pt_test::base_day()).count();
        return 0.1 * static_cast<double>((d * 7) % 19);
    });
}

std::string score_and_aggregation() {
    std::mt19937_64 rng(1);
    SeverityWeights w;
    for (int i = 0; i < 1000; ++i) {
        auto d = pt_test::random_distribution(rng);
        const double got = score_event(d, w);
        require(std::fabs(got - pt_oracle::score(d.probs, w.weights())) <= 1e-12, "score differs from oracle");
    }
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<EnrichedEvent> ev;
        std::vector<std::pair<long, double>> pairs;
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            const int d = static_cast<int>(rng() % 12);
            const double s = u(rng);
            ev.push_back(pt_test::enriched("u", d, s, static_cast<int>(rng() % 86400)));
            pairs.emplace_back(d, s);
        }
        auto oracle = pt_oracle::daily_means(pairs);
        auto series = aggregate_daily(ev);
        require(series.size() == oracle.size(), "day count differs");
        std::size_t i = 0;
        for (const auto& [d, m] : oracle) {
            require(series.points[i].x == d - oracle.begin()->first, "day offset differs");
            require(series.points[i].raw == m, "daily mean differs from oracle");
            ++i;
        }
    }
    return "1000 distributions, 1000 timelines";
}

std::string smoothing_properties() {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 60;
        auto xs = pt_test::random_offsets(rng, n);
        auto ys = pt_test::random_values(rng, n);
        auto base = pt_test::series(xs, ys);
        const int window = 1 + 2 * static_cast<int>(rng() % 8);
        auto s = smooth(base, window);
        const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
        for (const auto& p : s.points) require(p.smoothed >= *lo && p.smoothed <= *hi, "smoothed value out of range");
        auto id = smooth(base, 1);
        for (std::size_t i = 0; i < n; ++i) require(id.points[i].smoothed == ys[i], "window 1 is not identity");
        auto c = smooth(pt_test::series(xs, std::vector<double>(n, ys[0])), window);
        for (const auto& p : c.points) require(p.smoothed == ys[0], "constant series moved");
    }
    return "200 series";
}

std::string oracle_equivalence() {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng() % 11;
        const std::size_t K = 1 + rng() % 6;
        auto xs = pt_test::random_offsets(rng, n, 4);
        auto ys = trial % 3 == 0 ? grid_values(rng, n) : pt_test::random_values(rng, n);
        auto s = topdown_segment(pt_test::series(xs, ys), {K, 0.001});
        auto o = pt_oracle::topdown(std::vector<double>(xs.begin(), xs.end()), ys, K);
        std::vector<IndexRange> expected;
        for (const auto& r : o.final_segments) expected.push_back({r.a, r.b});
        require(ranges_of(s) == expected, fmt::format("trial {} differs from stepwise oracle", trial));
    }
    return "500 trials, n<=12, K<=6";
}

std::string vertex_recovery() {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng() % 5;
        std::vector<int> xs{0};
        std::vector<double> ys{0.0};
        std::vector<std::size_t> vertices;
        int slope = static_cast<int>(rng() % 7) - 3;
        for (std::size_t piece = 0; piece <= m; ++piece) {
            const std::size_t len = 2 + rng() % 6;
            for (std::size_t i = 0; i < len; ++i) {
                const int gap = 1 + static_cast<int>(rng() % 3);
                xs.push_back(xs.back() + gap);
                ys.push_back(ys.back() + slope * gap);
            }
            if (piece < m) {
                vertices.push_back(xs.size() - 1);
                int next;
                do next = static_cast<int>(rng() % 7) - 3;
                while (next == slope);
                slope = next;
            }
        }
        auto s = topdown_segment(pt_test::series(xs, ys), {10, 0.001});
        require(s.change_points.size() == m, fmt::format("trial {}: {} change points, expected {}", trial,
                                                         s.change_points.size(), m));
        std::vector<std::size_t> found;
        for (std::size_t k = 1; k < s.segments.size(); ++k) found.push_back(s.segments[k].first);
        require(found == vertices, fmt::format("trial {}: splits off the vertices", trial));
        auto trace = pt_oracle::topdown(std::vector<double>(xs.begin(), xs.end()), ys, 10);
        std::set<std::size_t> first_m(trace.splits.begin(), trace.splits.begin() + static_cast<std::ptrdiff_t>(m));
        require(first_m == std::set<std::size_t>(vertices.begin(), vertices.end()),
                fmt::format("trial {}: first splits are not the vertices", trial));
    }
    return "100 signals, m<=5";
}

std::string structural_invariants() {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 80;
        const std::size_t K = 1 + rng() % 12;
        auto xs = pt_test::random_offsets(rng, n);
        auto ys = grid_values(rng, n);
        auto series = pt_test::series(xs, ys);
        auto s = topdown_segment(series, {K, 0.001});
        validate_segmentation(s, series);
        require(s.segments.size() <= K, "more than K segments");
        require(s.segments.front().first == 0 && s.segments.back().last == n - 1, "does not cover [1,n]");
        for (std::size_t k = 1; k < s.segments.size(); ++k) {
            require(s.segments[k].first == s.segments[k - 1].last, "endpoints not shared");
        }
        require(topdown_segment(series, {K, 0.001}) == s, "rerun differs");
        auto shifted = ys;
        for (auto& y : shifted) y += 8.0;
        require(topdown_segment(pt_test::series(xs, shifted), {K, 0.001}).change_points == s.change_points,
                "y-shift moved change points");
    }
    return "1000 series";
}

std::string pipeline_reproduction() {
    const std::filesystem::path data = PHASETRACE_TEST_DATA_DIR;
    const auto cfg = load_config(data / "config.json");
    RunInputs in;
    in.events = data / "events.jsonl";
    in.topics = data / "topics.jsonl";
    in.notes = data / "notes.jsonl";
    pt_test::TempDir dir;
    ArtifactStore store(dir / "store");
    auto summary = run_pipeline(cfg, in, store);
    require(summary.failures.empty(), "pipeline reported failures");
    require(summary.succeeded.size() == 5, fmt::format("{} users succeeded, expected 5", summary.succeeded.size()));

    std::size_t phases = 0;
    for (const auto& user : summary.succeeded) {
        const auto seg = store.read_segmentation(user, AblationVariant::full);
        const auto rep = store.read_report(user, AblationVariant::full);
        require(seg && rep, "missing artifacts for " + user);
        require(rep->mode == ReportMode::traj, user + ": report is not traj mode");
        require(rep->phases.size() == seg->segments.size(), user + ": phase count differs from segment count");
        for (std::size_t k = 0; k < seg->segments.size(); ++k) {
            const auto& s = seg->segments[k];
            const std::string header = fmt::format("Phase {} (from {} to {})", k + 1, format_date(s.start_date),
                                                   format_date(s.end_date));
            require(rep->phases[k].text.compare(0, header.size(), header) == 0,
                    user + ": phase header mismatch, expected \"" + header + "\"");
            if (k > 0) {
                require(seg->segments[k - 1].start_date < s.start_date, user + ": phases out of date order");
            }
        }
        phases += rep->phases.size();
    }
    const auto s2714 = store.read_report("s2714", AblationVariant::full);
    require(s2714 && !s2714->phases.empty(), "user s2714 missing");
    const std::string anchor = "Phase 1 (from 2013-09-23 to 2014-12-19)";
    require(s2714->phases[0].text.compare(0, anchor.size(), anchor) == 0, "s2714 first phase is not " + anchor);

    const auto before = pt_test::snapshot(store.root());
    run_pipeline(cfg, in, store);
    require(pt_test::snapshot(store.root()) == before, "rerun changed the store");

    pt_test::TempDir dir2;
    ArtifactStore fresh(dir2 / "store");
    run_pipeline(cfg, in, fresh);
    for (const auto& user : summary.succeeded) {
        const auto rel = std::filesystem::relative(store.user_dir(user), store.root()) / "reports" / "full.json";
        require(pt_test::read_file(store.root() / rel) == pt_test::read_file(fresh.root() / rel),
                user + ": report differs between stores");
    }
    return fmt::format("5 users, {} phases, byte-identical rerun", phases);
}

std::string ablation_contract() {
    auto cls = zigzag();
    PipelineConfig cfg;
    TemplateBackend gen;
    require(run_variant(AblationVariant::noseg, days_timeline(40), cls, gen, cfg).phases.size() == 1,
            "noseg did not yield one phase");
    PipelineConfig ten = cfg;
    ten.k = 10;
    const auto fw = run_variant(AblationVariant::fixedwin, days_timeline(20), cls, gen, ten);
    require(fw.phases.size() == 10, fmt::format("fixedwin gave {} phases", fw.phases.size()));

    pt_test::RecordingBackend nostats;
    run_variant(AblationVariant::nostats, days_timeline(60), cls, nostats, cfg);
    for (const auto& p : nostats.prompts()) {
        require(p.find("## Descriptors") == std::string::npos && p.find("Mean severity") == std::string::npos,
                "nostats prompt carries descriptors");
    }
    pt_test::RecordingBackend base;
    run_variant(AblationVariant::base, days_timeline(60), cls, base, cfg);
    require(base.prompts().size() == 1, "base made more than one call");
    for (const char* banned : {"Phase", "phase", "segment", "Descriptors", "Mean severity"}) {
        require(base.prompts()[0].find(banned) == std::string::npos, std::string("base prompt mentions ") + banned);
    }
    return "noseg=1, fixedwin=10, nostats and base prompts clean";
}

std::string evaluation_harness() {
    const std::vector<std::string> topics{"music",   "nature",  "sleep",   "work",  "friends",
                                          "family",  "gaming",  "therapy", "reading", "weather",
                                          "cooking", "pets",    "exercise", "travel", "art"};
    auto report_naming = [&](std::size_t k) {
        std::string out = "The person wrote about";
        for (std::size_t i = 0; i < k; ++i) out += " " + topics[i] + ",";
        return out + " and little else.";
    };
    TemplateBackend judge;
    const auto r12 = assess_topic_coverage(report_naming(12), topics, judge);
    const auto r4 = assess_topic_coverage(report_naming(4), topics, judge);
    require(r12.covered == 12 && r12.fraction() == 0.8, "12/15 not reproduced");
    require(r4.covered == 4 && std::fabs(r4.fraction() - 0.267) < 5e-4, "4/15 not reproduced");

    std::mt19937_64 rng(9);
    std::size_t ba = 0;
    for (int i = 0; i < 100; ++i) {
        LikertScores a{}, b{};
        for (auto& x : a) x = 1 + static_cast<int>(rng() % 5);
        for (auto& x : b) x = 1 + static_cast<int>(rng() % 5);
        const std::uint64_t seed = rng();
        const bool ab = presentation_order(seed) == PresentationOrder::AB;
        if (!ab) ++ba;
        pt_test::QueueBackend q({format_judge_response(ab ? a : b, ab ? b : a)});
        auto v = judge_compare("A", "B", q, seed, "j");
        require(v.report_a == a && v.report_b == b, fmt::format("verdict {} misattributed", i));
        require(verdict_from_json(to_json(v)) == v, fmt::format("verdict {} does not round-trip", i));
    }
    require(ba > 0 && ba < 100, "presentation order never varied");
    return fmt::format("coverage 12/15={:.3f}, 4/15={:.3f}; 100 verdicts ({} BA)", r12.fraction(), r4.fraction(), ba);
}

/// Published judge scores need proprietary judges and licensed data. What
/// can be checked here is the orchestration: stored reports go through an
/// HTTP chat judge and come out as the criterion table.
std::string judged_scores_not_reproducible() {
    const std::filesystem::path data = PHASETRACE_TEST_DATA_DIR;
    auto cfg = load_config(data / "config.json");
    RunInputs in;
    in.events = data / "events.jsonl";
    pt_test::TempDir dir;
    ArtifactStore store(dir / "store");
    RunOptions opts;
    opts.variants = {AblationVariant::full, AblationVariant::base};
    run_pipeline(cfg, in, store, opts);

    const LikertScores first{5, 4, 4, 5, 5}, second{2, 2, 1, 1, 2};
    httplib::Server mock;
    mock.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(nlohmann::json{{"content", format_judge_response(first, second)}}.dump(), "application/json");
    });
    const int port = mock.bind_to_any_port("127.0.0.1");
    std::thread server([&] { mock.listen_after_bind(); });
    mock.wait_until_ready();
    struct Stop {
        httplib::Server& s;
        std::thread& t;
        ~Stop() {
            s.stop();
            t.join();
        }
    } stop{mock, server};

    HttpSettings http;
    http.url = fmt::format("http://127.0.0.1:{}/chat", port);
    http.backoff_ms = 1;
    HttpChatBackend chat(http, "mock-judge");

    std::vector<ReportPair> pairs;
    for (const auto& user : store.users()) {
        pairs.push_back({user, render_report_text(*store.read_report(user, AblationVariant::full)),
                         render_report_text(*store.read_report(user, AblationVariant::base))});
    }
    std::vector<NamedJudge> judges{{"mock", &chat}};
    auto judged = judge_all(pairs, judges, 7, 2);
    std::vector<JudgeVerdict> verdicts;
    for (const auto& j : judged) verdicts.push_back(j.verdict);
    const auto table = aggregate_verdicts(verdicts);
    std::vector<JudgeColumn> cols{{"mock", table}};
    const auto csv = criterion_table_csv(cols);
    require(csv.rfind("criterion,mock Base,mock Traj\n", 0) == 0, "unexpected table header");
    require(table.count == pairs.size(), "verdict count differs from pair count");
    return fmt::format("published judge scores not reproduced (proprietary judges, licensed corpus); "
                       "orchestration verified over HTTP for {} users",
                       pairs.size());
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    criterion("score/aggregation exactness", 1.0, score_and_aggregation);
    criterion("smoothing properties", 1.0, smoothing_properties);
    criterion("segmentation oracle equivalence", 10.0, oracle_equivalence);
    criterion("exact vertex recovery", 5.0, vertex_recovery);
    criterion("structural invariants", 0.0, structural_invariants);
    criterion("pipeline reproduction", 0.0, pipeline_reproduction);
    criterion("ablation contract", 0.0, ablation_contract);
    criterion("evaluation harness", 0.0, evaluation_harness);
    criterion("judge scores (not reproducible)", 0.0, judged_scores_not_reproducible);
    std::printf("%s\n", failures == 0 ? "ALL PASS" : fmt::format("{} FAILED", failures).c_str());
    return failures == 0 ? 0 : 1;
}
