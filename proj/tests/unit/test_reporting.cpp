// Prompts, phase reports, composition, baseline and the judge grammar.

#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <random>

#include "backends.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "phasetrace/error.hpp"
#include "phasetrace/likert.hpp"
#include "phasetrace/reporting.hpp"

using namespace phasetrace;
using pt_test::day;

namespace {

Segment segment(const std::string& from, const std::string& to, std::size_t position = 1, std::size_t total = 1,
                Trend trend = Trend::worsening) {
    Segment s;
    s.first = position - 1;
    s.last = position;
    s.start_date = day(from);
    s.end_date = day(to);
    s.mean_severity = 1.25;
    s.slope = 0.0123;
    s.trend = trend;
    s.position = position;
    s.total = total;
    return s;
}

std::vector<EnrichedEvent> events_between(const std::string& user, const std::string& from, int count,
                                          int step_days = 1) {
    std::vector<EnrichedEvent> out;
    auto start = day(from);
    for (int i = 0; i < count; ++i) {
        EnrichedEvent e;
        e.event = pt_test::event(user, Timestamp{start + std::chrono::days{i * step_days}} + std::chrono::hours{9},
                                 "post number " + std::to_string(i));
        e.score = 1.0;
        out.push_back(e);
    }
    return out;
}

}  // namespace

TEST(PhasePrompt, DescriptorBlockFollowsIncludeStats) {
    auto seg = segment("2015-01-01", "2015-01-10");
    auto ev = events_between("u", "2015-01-01", 5);
    auto with = build_phase_prompt(seg, ev, true);
    EXPECT_NE(with.text.find("## Descriptors\nMean severity: 1.250\nTrend: worsening (slope +0.0123 per day)"),
              std::string::npos)
        << with.text;
    auto without = build_phase_prompt(seg, ev, false);
    EXPECT_EQ(without.text.find("Descriptors"), std::string::npos);
    EXPECT_EQ(without.text.find("Mean severity"), std::string::npos);
    EXPECT_EQ(without.text.find("Trend:"), std::string::npos);
    EXPECT_NE(without.text.find("## Phase 1 of 1 (from 2015-01-01 to 2015-01-10)"), std::string::npos);
    EXPECT_EQ(with.excerpts.size(), 5u);
}

TEST(PhasePrompt, NoActivity) {
    auto p = build_phase_prompt(segment("2015-01-01", "2015-01-10"), {}, true);
    EXPECT_NE(p.text.find("No activity recorded"), std::string::npos);
    EXPECT_EQ(p.event_count, 0u);
}

TEST(PhasePrompt, EventOutsideSegmentIsContractError) {
    auto ev = events_between("u", "2015-01-11", 1);
    EXPECT_THROW(build_phase_prompt(segment("2015-01-01", "2015-01-10"), ev, true), ContractError);
}

TEST(PhasePrompt, SubsamplingKeepsEndpointsAndCount) {
    auto ev = events_between("u", "2010-01-01", 1000);
    auto seg = segment("2010-01-01", "2012-12-31");
    auto p = build_phase_prompt(seg, ev, true);
    ASSERT_EQ(p.excerpts.size(), 200u);
    EXPECT_EQ(p.event_count, 1000u);
    EXPECT_EQ(p.excerpts.front().key, key_of(ev.front().event));
    EXPECT_EQ(p.excerpts.back().key, key_of(ev.back().event));
    EXPECT_TRUE(std::is_sorted(p.excerpts.begin(), p.excerpts.end(),
                               [](const auto& a, const auto& b) { return a.key < b.key; }));
    EXPECT_NE(p.text.find("(1000 recorded, 200 shown)"), std::string::npos);
}

TEST(Subsample, MatchesOracle) {
    for (std::size_t count = 0; count < 300; count += 7) {
        for (std::size_t limit : {1u, 2u, 3u, 10u, 200u}) {
            auto got = subsample_indices(count, limit);
            if (count == 0) {
                EXPECT_TRUE(got.empty());
                continue;
            }
            EXPECT_EQ(got, pt_oracle::even_subsample(count, limit)) << count << " " << limit;
            EXPECT_EQ(got.size(), std::min(count, limit));
            EXPECT_EQ(got.front(), 0u);
            if (limit > 1) {
                EXPECT_EQ(got.back(), count - 1);
            }
            EXPECT_TRUE(std::adjacent_find(got.begin(), got.end(), std::greater_equal<>()) == got.end());
        }
    }
    auto big = subsample_indices(1000, 200);
    EXPECT_EQ(big.size(), 200u);
    EXPECT_EQ(big.front(), 0u);
    EXPECT_EQ(big.back(), 999u);
}

TEST(PhasePrompt, ExcerptTruncation) {
    auto ev = events_between("u", "2015-01-01", 1);
    ev[0].event.text = std::string(500, 'a');
    PromptOptions opts;
    opts.excerpt_chars = 400;
    auto p = build_phase_prompt(segment("2015-01-01", "2015-01-02"), ev, true, opts);
    EXPECT_EQ(p.excerpts[0].text, std::string(400, 'a') + "...");
    EXPECT_EQ(truncate_utf8("\xC3\xA9\xC3\xA9\xC3\xA9", 2), "\xC3\xA9\xC3\xA9...");
    EXPECT_EQ(truncate_utf8("abc", 3), "abc");
}

TEST(PhasePrompt, ContextDocumentsBlock) {
    PromptOptions opts;
    opts.context_documents = {"clinician note: started therapy"};
    auto p = build_phase_prompt(segment("2015-01-01", "2015-01-02"), {}, true, opts);
    EXPECT_NE(p.text.find("## Context\n- clinician note: started therapy"), std::string::npos) << p.text;
    auto plain = build_phase_prompt(segment("2015-01-01", "2015-01-02"), {}, true);
    EXPECT_EQ(plain.text.find("## Context"), std::string::npos);
}

TEST(PhaseReport, HeaderFormat) {
    TemplateBackend backend;
    auto seg = segment("2013-09-23", "2014-12-19");
    auto ev = events_between("2714", "2013-09-23", 30, 10);
    auto r = generate_phase_report(backend, seg, ev, true);
    EXPECT_EQ(r.text.rfind("Phase 1 (from 2013-09-23 to 2014-12-19)", 0), 0u) << r.text;
    EXPECT_EQ(r.evidence.size(), 30u);
    auto again = generate_phase_report(backend, seg, ev, true);
    EXPECT_EQ(again, r);
}

TEST(PhaseReport, EmptySegmentNotesAbsence) {
    TemplateBackend backend;
    auto r = generate_phase_report(backend, segment("2014-01-01", "2014-02-01"), {}, true);
    EXPECT_NE(r.text.find("no activity"), std::string::npos);
}

TEST(PhaseReport, TransportErrorCarriesSegment) {
    pt_test::FailingBackend backend;
    try {
        generate_phase_report(backend, segment("2014-01-01", "2014-02-01", 3, 4), {}, true);
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_NE(std::string(e.what()).find("Phase 3 (from 2014-01-01 to 2014-02-01)"), std::string::npos);
    }
}

TEST(PhaseReport, EmptyReplyIsValidationError) {
    pt_test::QueueBackend backend({"   "});
    EXPECT_THROW(generate_phase_report(backend, segment("2014-01-01", "2014-02-01"), {}, true), ValidationError);
}

TEST(Compose, FivePhasesThenOverall) {
    TemplateBackend backend;
    std::vector<PhaseReport> phases;
    const char* bounds[] = {"2014-01-01", "2014-03-01", "2014-05-01", "2014-07-01", "2014-09-01", "2014-11-01"};
    for (std::size_t k = 0; k < 5; ++k) {
        auto seg = segment(bounds[k], bounds[k + 1], k + 1, 5, k % 2 ? Trend::improving : Trend::worsening);
        phases.push_back(generate_phase_report(backend, seg, {}, true));
    }
    auto report = compose_global_report(backend, "u", ReportMode::traj, phases);
    EXPECT_EQ(report.phases.size(), 5u);
    EXPECT_EQ(report.prompt_version, "v1");
    auto text = render_report_text(report);
    std::size_t pos = 0;
    for (std::size_t k = 1; k <= 5; ++k) {
        auto at = text.find("Phase " + std::to_string(k) + " (from", pos);
        ASSERT_NE(at, std::string::npos);
        pos = at;
    }
    auto overall = text.find("Overall summary:");
    EXPECT_GT(overall, pos);

    std::swap(phases[1], phases[2]);
    EXPECT_THROW(compose_global_report(backend, "u", ReportMode::traj, phases), ContractError);
    EXPECT_THROW(compose_global_report(backend, "u", ReportMode::traj, {}), ContractError);
}

TEST(Compose, SinglePhaseAndPromptHoldsOnlyPhaseTexts) {
    pt_test::RecordingBackend backend;
    auto seg = segment("2014-01-01", "2014-02-01");
    auto ev = events_between("u", "2014-01-05", 2);
    auto phase = generate_phase_report(backend, seg, ev, true);
    auto report = compose_global_report(backend, "u", ReportMode::noseg, {phase});
    EXPECT_NE(report.overall.find("Across 1 phase"), std::string::npos) << report.overall;
    auto prompts = backend.prompts();
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_NE(prompts[1].find(phase.text), std::string::npos);
    // raw posts only reach the composer through the phase texts
    EXPECT_EQ(prompts[1].find("## Events"), std::string::npos);
}

TEST(Baseline, ModeAndNoSegmentStructure) {
    pt_test::RecordingBackend backend;
    auto ev = events_between("u", "2014-01-01", 500);
    auto r = generate_baseline_report(backend, "u", ev);
    EXPECT_EQ(r.mode, ReportMode::base);
    EXPECT_TRUE(r.phases.empty());
    EXPECT_EQ(render_report_text(r), r.overall);
    auto prompts = backend.prompts();
    ASSERT_EQ(prompts.size(), 1u);
    for (const char* banned : {"Phase", "phase", "segment", "Segment", "Descriptors", "Mean severity", "Trend"}) {
        EXPECT_EQ(prompts[0].find(banned), std::string::npos) << banned;
    }
    auto p = build_baseline_prompt(ev);
    EXPECT_EQ(p.excerpts.size(), 200u);
    auto idx = pt_oracle::even_subsample(500, 200);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(p.excerpts[i].key, key_of(ev[idx[i]].event));
    EXPECT_THROW(generate_baseline_report(backend, "u", {}), ContractError);
}

TEST(TrajectoryReport, PhasesAlignWithSegments) {
    TemplateBackend backend;
    auto ev = events_between("u", "2014-01-01", 10);
    auto series = aggregate_daily(ev);
    auto seg = segment_series(series, SegmentationMethod::fixed_window, {3, 0.001});
    auto r = generate_trajectory_report(backend, "u", ReportMode::fixedwin, seg, ev, true);
    ASSERT_EQ(r.phases.size(), seg.segments.size());
    for (std::size_t k = 0; k < r.phases.size(); ++k) {
        EXPECT_EQ(r.phases[k].segment, ref_of(seg.segments[k]));
        EXPECT_EQ(r.phases[k].text.rfind(phase_header(r.phases[k].segment), 0), 0u);
    }
    // boundary days belong to both neighbours
    auto in1 = events_in_segment(ev, seg.segments[0]);
    auto in2 = events_in_segment(ev, seg.segments[1]);
    EXPECT_EQ(in1.back().event, in2.front().event);
}

TEST(Modes, RoundTrip) {
    for (auto m : {ReportMode::traj, ReportMode::base, ReportMode::noseg, ReportMode::fixedwin, ReportMode::nosmooth,
                   ReportMode::nostats}) {
        EXPECT_EQ(parse_report_mode(to_string(m)), m);
    }
    EXPECT_THROW(parse_report_mode("nope"), ParseError);
}

TEST(Prompts, RenderAndMissingPlaceholder) {
    PromptSet set("t", {{"x", "a {{b}} c {{d}}"}});
    EXPECT_EQ(set.render("x", {{"b", "1"}, {"d", "2"}}), "a 1 c 2");
    EXPECT_THROW(set.render("x", {{"b", "1"}}), ConfigError);
    EXPECT_THROW(set.get("missing"), ConfigError);
    EXPECT_EQ(PromptSet::builtin().version(), "v1");
    for (const char* name : {"phase", "compose", "base", "judge", "judge_retry", "coverage", "answer", "descriptors",
                             "context", "preamble"}) {
        EXPECT_NO_THROW(PromptSet::builtin().get(name)) << name;
    }
}

TEST(Prompts, LoadFromDirectory) {
    pt_test::TempDir dir;
    auto v2 = dir.path() / "v2";
    std::filesystem::create_directories(v2);
    EXPECT_THROW(PromptSet::load(v2), ConfigError);
    for (const char* name : {"phase", "compose", "base", "judge", "judge_retry", "coverage", "answer", "descriptors",
                             "context", "preamble"}) {
        std::ofstream(v2 / (std::string(name) + ".txt")) << PromptSet::builtin().get(name) << "\n";
    }
    auto set = PromptSet::load(v2);
    EXPECT_EQ(set.version(), "v2");
    EXPECT_EQ(set.get("judge"), PromptSet::builtin().get("judge"));
}

TEST(Likert, FormatParseRoundTrip) {
    LikertScores a{4, 3, 2, 4, 3}, b{1, 2, 3, 4, 5};
    auto text = format_judge_response(a, b);
    EXPECT_NE(text.find("Trajectory Coverage: 4/5"), std::string::npos);
    auto parsed = parse_judge_response(text);
    EXPECT_EQ(parsed.report_1, a);
    EXPECT_EQ(parsed.report_2, b);
}

TEST(Likert, TolerantParsing) {
    std::string text =
        "## Report 1\n**Trajectory Coverage**: 4\ntemporal coherence: 3/5\nSensitivity to Change Points: 2 / 5\n"
        "Segment-Level Specificity: 4/5\nOverall Preference: 3/5\n\n**Report 2**\nTrajectory Coverage: 5/5\n"
        "Temporal Coherence: 5/5\nSensitivity to Change Points: 5/5\nSegment-Level Specificity: 5/5\n"
        "Overall Preference: 5/5\n";
    auto parsed = parse_judge_response(text);
    EXPECT_EQ(parsed.report_1, (LikertScores{4, 3, 2, 4, 3}));
    EXPECT_EQ(parsed.report_2, (LikertScores{5, 5, 5, 5, 5}));
}

TEST(Likert, MissingOrInvalidCriterion) {
    LikertScores a{4, 3, 2, 4, 3};
    auto text = format_judge_response(a, a);
    auto missing = text;
    missing.erase(missing.find("Temporal Coherence: 3/5\n"), 24);
    EXPECT_THROW(parse_judge_response(missing), ParseError);
    auto invalid = text;
    invalid.replace(invalid.find("Trajectory Coverage: 4/5"), 24, "Trajectory Coverage: 7/5");
    EXPECT_THROW(parse_judge_response(invalid), ParseError);
    EXPECT_THROW(parse_judge_response("I prefer report 1."), ParseError);
}

TEST(Likert, Labels) {
    EXPECT_EQ(criterion_key(Criterion::trajectory_coverage), "trajectory_coverage");
    EXPECT_EQ(criterion_label(Criterion::change_point_sensitivity), "Sensitivity to Change Points");
    EXPECT_EQ(criterion_row_label(Criterion::trajectory_coverage), "Trajectory coverage");
}
