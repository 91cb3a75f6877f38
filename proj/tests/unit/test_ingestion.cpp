// Event parsing, timeline preparation and timestamp repair.

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "phasetrace/error.hpp"
#include "phasetrace/ingestion.hpp"

using namespace phasetrace;
using pt_test::ts;

namespace {

ParsedEvents parse_jsonl(const std::string& text) {
    std::istringstream in(text);
    return parse_events(in, InputFormat::jsonl);
}

RawEvent raw(std::size_t line, std::optional<Timestamp> t, const std::string& text = "x") {
    RawEvent r;
    r.line = line;
    r.user_id = "u";
    r.timestamp = t;
    r.timestamp_status = t ? TimestampStatus::present : TimestampStatus::missing;
    r.source = "forum";
    r.text = text;
    return r;
}

}  // namespace

TEST(Time, ParsesCommonForms) {
    EXPECT_EQ(format_timestamp(ts("2014-08-11")), "2014-08-11T00:00:00Z");
    EXPECT_EQ(format_timestamp(ts("2014-08-11T10:20:30Z")), "2014-08-11T10:20:30Z");
    EXPECT_EQ(format_timestamp(ts("2014-08-11 10:20")), "2014-08-11T10:20:00Z");
    EXPECT_EQ(format_timestamp(ts("2014-08-11T10:20:30+02:00")), "2014-08-11T08:20:30Z");
    EXPECT_EQ(format_timestamp(ts("2014-08-11T10:20:30.250Z")), "2014-08-11T10:20:30Z");
    EXPECT_FALSE(parse_timestamp("2014-13-01"));
    EXPECT_FALSE(parse_timestamp("2014-02-30"));
    EXPECT_FALSE(parse_timestamp("yesterday"));
    EXPECT_FALSE(parse_date("2014-08-11T00:00:00Z"));
    EXPECT_EQ(format_date(pt_test::day("2016-02-29")), "2016-02-29");
}

TEST(ParseEvents, ReferenceExampleLine) {
    auto parsed = parse_jsonl(
        R"({"user_id":"2714","timestamp":"2014-08-11T00:00:00Z","source":"reddit","text":"Hi, I've been diagnosed with PTSD..."})"
        "\n");
    ASSERT_EQ(parsed.records.size(), 1u);
    EXPECT_TRUE(parsed.rejections.empty());
    const auto& r = parsed.records[0];
    EXPECT_EQ(r.user_id, "2714");
    ASSERT_TRUE(r.timestamp);
    EXPECT_EQ(format_date(to_date(*r.timestamp)), "2014-08-11");
    EXPECT_EQ(r.source, "reddit");
    EXPECT_EQ(r.text, "Hi, I've been diagnosed with PTSD...");
}

TEST(ParseEvents, EmptyStream) {
    auto parsed = parse_jsonl("");
    EXPECT_TRUE(parsed.records.empty());
    EXPECT_TRUE(parsed.rejections.empty());
}

TEST(ParseEvents, MissingTextIsRejectedWithLine) {
    auto parsed = parse_jsonl(R"({"user_id":"a","timestamp":"2014-08-11","source":"reddit"})"
                              "\n");
    EXPECT_TRUE(parsed.records.empty());
    ASSERT_EQ(parsed.rejections.size(), 1u);
    EXPECT_EQ(parsed.rejections[0].line, 1u);
    EXPECT_NE(parsed.rejections[0].reason.find("text"), std::string::npos);
}

TEST(ParseEvents, BadLinesDoNotStopTheRest) {
    auto parsed = parse_jsonl("not json\n"
                              R"({"user_id":"a","timestamp":"2014-08-11","text":"ok"})"
                              "\n\n[1,2]\n"
                              R"({"user_id":"a","timestamp":"garbage","text":"kept for repair"})"
                              "\n");
    ASSERT_EQ(parsed.records.size(), 2u);
    EXPECT_EQ(parsed.records[0].line, 2u);
    EXPECT_EQ(parsed.records[0].source, "unknown");
    EXPECT_EQ(parsed.records[1].timestamp_status, TimestampStatus::unparseable);
    ASSERT_EQ(parsed.rejections.size(), 2u);
    EXPECT_EQ(parsed.rejections[0].line, 1u);
    EXPECT_EQ(parsed.rejections[1].line, 4u);
}

TEST(ParseEvents, InvalidUtf8Rejected) {
    auto parsed = parse_jsonl("{\"user_id\":\"a\",\"timestamp\":\"2014-08-11\",\"text\":\"\xC3\x28\"}\n");
    EXPECT_TRUE(parsed.records.empty());
    ASSERT_EQ(parsed.rejections.size(), 1u);
}

TEST(ParseEvents, CsvWithQuoting) {
    std::istringstream in("user_id,timestamp,source,text\n"
                          "a,2014-08-11T09:00:00Z,reddit,\"hello, \"\"world\"\"\"\n"
                          "b,2014-08-12,twitter,\"two\nlines\"\n"
                          "c,2014-08-13,twitter\n");
    auto parsed = parse_events(in, InputFormat::csv);
    ASSERT_EQ(parsed.records.size(), 2u);
    EXPECT_EQ(parsed.records[0].text, "hello, \"world\"");
    EXPECT_EQ(parsed.records[1].text, "two\nlines");
    EXPECT_EQ(parsed.records[1].line, 3u);
    ASSERT_EQ(parsed.rejections.size(), 1u);
    EXPECT_EQ(parsed.rejections[0].line, 5u);
}

TEST(ParseEvents, UnknownFormatTag) {
    EXPECT_EQ(parse_input_format("jsonl"), InputFormat::jsonl);
    EXPECT_EQ(parse_input_format("csv"), InputFormat::csv);
    EXPECT_THROW(parse_input_format("xml"), ConfigError);
}

TEST(ParseEvents, UnreadableFile) {
    EXPECT_THROW(parse_events_file("/nonexistent/events.jsonl", InputFormat::jsonl), IoError);
}

TEST(PrepareTimeline, DuplicatesRemoved) {
    auto e = pt_test::event("u", ts("2015-01-02T10:00:00Z"), "same text");
    auto out = prepare_timeline({e, e}, PrepConfig{});
    EXPECT_EQ(out.timeline.events.size(), 1u);
    ASSERT_EQ(out.removed.size(), 1u);
    EXPECT_EQ(out.removed[0].rule, RemovalRule::duplicate);
}

TEST(PrepareTimeline, SortsByTimestamp) {
    auto out = prepare_timeline({pt_test::event("u", ts("2015-01-02"), "later"),
                                 pt_test::event("u", ts("2014-12-31"), "earlier")},
                                PrepConfig{});
    ASSERT_EQ(out.timeline.events.size(), 2u);
    EXPECT_EQ(format_date(to_date(out.timeline.events[0].timestamp)), "2014-12-31");
    EXPECT_EQ(format_date(to_date(out.timeline.events[1].timestamp)), "2015-01-02");
}

TEST(PrepareTimeline, Normalization) {
    EXPECT_EQ(normalize_text("  Hello   WORLD "), "hello world");
    auto out = prepare_timeline({pt_test::event("u", ts("2015-01-02"), "  Hello   WORLD ")}, PrepConfig{});
    EXPECT_EQ(out.timeline.events[0].text, "hello world");

    PrepConfig keep;
    keep.lowercase = false;
    out = prepare_timeline({pt_test::event("u", ts("2015-01-02"), "  Hello   WORLD ")}, keep);
    EXPECT_EQ(out.timeline.events[0].text, "  Hello   WORLD ");
}

TEST(PrepareTimeline, MinLengthCountsCodePoints) {
    PrepConfig cfg;
    cfg.min_text_length = 3;
    auto out = prepare_timeline({pt_test::event("u", ts("2015-01-01"), "\xC3\xA9\xC3\xA9"),
                                 pt_test::event("u", ts("2015-01-02"), "\xC3\xA9\xC3\xA9\xC3\xA9"),
                                 pt_test::event("u", ts("2015-01-03"), "   ")},
                                cfg);
    ASSERT_EQ(out.timeline.events.size(), 1u);
    EXPECT_EQ(out.removed.size(), 2u);
    EXPECT_EQ(out.removed[0].rule, RemovalRule::too_short);
}

TEST(PrepareTimeline, MixedUsersIsContractError) {
    EXPECT_THROW(prepare_timeline({pt_test::event("a", ts("2015-01-01")), pt_test::event("b", ts("2015-01-01"))},
                                  PrepConfig{}),
                 ContractError);
}

TEST(PrepareTimeline, StableForEqualTimestamps) {
    auto t = ts("2015-01-01T12:00:00Z");
    auto out = prepare_timeline({pt_test::event("u", t, "first"), pt_test::event("u", t, "second")}, PrepConfig{});
    ASSERT_EQ(out.timeline.events.size(), 2u);
    EXPECT_EQ(out.timeline.events[0].text, "first");
}

// Output is sorted, duplicate-free and a sub-multiset of the input, whatever the input order.
TEST(PrepareTimeline, PropertySortedAndOrderIndependent) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Event> events;
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            auto when = Timestamp{pt_test::base_day()} + std::chrono::hours{static_cast<int>(rng() % 200)};
            events.push_back(pt_test::event("u", when, "t" + std::to_string(rng() % 5)));
        }
        auto a = prepare_timeline(events, PrepConfig{});
        std::shuffle(events.begin(), events.end(), rng);
        auto b = prepare_timeline(events, PrepConfig{});
        ASSERT_TRUE(std::is_sorted(a.timeline.events.begin(), a.timeline.events.end(),
                                   [](const Event& l, const Event& r) { return l.timestamp < r.timestamp; }));
        ASSERT_EQ(a.timeline.events.size() + a.removed.size(), static_cast<std::size_t>(n));
        auto key = [](const Event& e) { return std::tie(e.timestamp, e.text); };
        auto sa = a.timeline.events, sb = b.timeline.events;
        auto by_key = [&](const Event& l, const Event& r) { return key(l) < key(r); };
        std::sort(sa.begin(), sa.end(), by_key);
        std::sort(sb.begin(), sb.end(), by_key);
        ASSERT_EQ(sa, sb);
        ASSERT_TRUE(std::adjacent_find(sa.begin(), sa.end(), [&](const Event& l, const Event& r) {
                        return key(l) == key(r);
                    }) == sa.end());
    }
}

TEST(InferTimestamps, Midpoint) {
    auto d0 = Timestamp{pt_test::base_day()};
    auto d2 = d0 + std::chrono::days{2};
    auto out = infer_missing_timestamps({raw(1, d0), raw(2, std::nullopt), raw(3, d2)});
    ASSERT_EQ(out.events.size(), 3u);
    EXPECT_EQ(out.events[1].timestamp, d0 + std::chrono::days{1});
    EXPECT_EQ(out.inferred, 1u);
}

TEST(InferTimestamps, BoundaryCopy) {
    auto d5 = Timestamp{pt_test::base_day() + std::chrono::days{5}};
    auto out = infer_missing_timestamps({raw(1, std::nullopt), raw(2, d5)});
    EXPECT_EQ(out.events[0].timestamp, d5);
    out = infer_missing_timestamps({raw(1, d5), raw(2, std::nullopt)});
    EXPECT_EQ(out.events[1].timestamp, d5);
}

TEST(InferTimestamps, NoneKnownIsUnrecoverable) {
    EXPECT_THROW(infer_missing_timestamps({raw(1, std::nullopt)}), UnrecoverableDataError);
}

TEST(Ingest, GroupsUsersAndRepairs) {
    auto parsed = parse_jsonl(R"({"user_id":"b","timestamp":"2014-08-11","text":"one"})"
                              "\n"
                              R"({"user_id":"a","timestamp":"2014-08-10","text":"two"})"
                              "\n"
                              R"({"user_id":"b","text":"three"})"
                              "\n"
                              R"({"user_id":"b","timestamp":"2014-08-13","text":"four"})"
                              "\n"
                              R"({"user_id":"c","text":"lonely"})"
                              "\n");
    auto result = ingest(parsed, PrepConfig{});
    ASSERT_EQ(result.timelines.size(), 2u);
    EXPECT_EQ(result.timelines[0].user_id, "a");
    EXPECT_EQ(result.timelines[1].user_id, "b");
    ASSERT_EQ(result.timelines[1].events.size(), 3u);
    EXPECT_EQ(format_date(to_date(result.timelines[1].events[1].timestamp)), "2014-08-12");
    // user c has no usable timestamp at all
    ASSERT_EQ(result.rejections.size(), 1u);
    EXPECT_EQ(result.rejections[0].line, 5u);
}

TEST(Ingest, NoInferenceRejectsMissing) {
    PrepConfig cfg;
    cfg.infer_timestamps = false;
    auto parsed = parse_jsonl(R"({"user_id":"b","timestamp":"2014-08-11","text":"one"})"
                              "\n"
                              R"({"user_id":"b","text":"three"})"
                              "\n");
    auto result = ingest(parsed, cfg);
    ASSERT_EQ(result.timelines.size(), 1u);
    EXPECT_EQ(result.timelines[0].events.size(), 1u);
    ASSERT_EQ(result.rejections.size(), 1u);
    EXPECT_EQ(result.rejections[0].line, 2u);
}

TEST(EventKey, Format) {
    EXPECT_EQ(key_of(pt_test::event("u1", ts("2014-08-11T10:00:00Z"))).str(), "u1@2014-08-11T10:00:00Z");
}
