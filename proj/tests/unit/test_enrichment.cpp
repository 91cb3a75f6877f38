// Distribution validation, severity scoring, classifier orchestration, topics.

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "phasetrace/enrichment.hpp"
#include "phasetrace/error.hpp"

using namespace phasetrace;
using pt_test::ts;

namespace {

ClassDistribution dep(double no, double moderate, double severe) {
    return {"depression", {{"no", no}, {"moderate", moderate}, {"severe", severe}}};
}

/// Returns a fixed distribution for every event; can be told to misbehave.
class FakeClassifier : public ClassifierBackend {
public:
    ClassDistribution reply = dep(0.2, 0.5, 0.3);
    std::atomic<int> calls{0};
    std::atomic<int> concurrent{0};
    std::atomic<int> peak{0};

    std::vector<std::vector<ClassDistribution>> classify(std::span<const Event> events,
                                                         std::span<const std::string> dimensions) override {
        ++calls;
        int now = ++concurrent;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        // Reverse completion order across batches.
        std::this_thread::sleep_for(std::chrono::milliseconds(events.front().text == "e0" ? 20 : 1));
        std::vector<std::vector<ClassDistribution>> out;
        for (std::size_t i = 0; i < events.size(); ++i) {
            std::vector<ClassDistribution> row;
            for (const auto& d : dimensions) {
                auto r = reply;
                r.dimension = d;
                row.push_back(r);
            }
            out.push_back(row);
        }
        --concurrent;
        return out;
    }
};

Timeline timeline_of(int n) {
    Timeline t{"u", {}};
    for (int i = 0; i < n; ++i) {
        t.events.push_back(pt_test::event("u", Timestamp{pt_test::base_day()} + std::chrono::hours{i},
                                          "e" + std::to_string(i)));
    }
    return t;
}

const std::vector<std::string> kDims{"depression"};

}  // namespace

TEST(Score, SpecExamples) {
    SeverityWeights w;
    EXPECT_DOUBLE_EQ(score_event(dep(1, 0, 0), w), 0.0);
    EXPECT_DOUBLE_EQ(score_event(dep(0, 0, 1), w), 2.0);
    // 0.2*0 + 0.5*1 + 0.3*2
    EXPECT_NEAR(score_event(dep(0.2, 0.5, 0.3), w), 1.1, 1e-12);
}

TEST(Score, MatchesDotProductOracle) {
    std::mt19937_64 rng(3);
    SeverityWeights w;
    for (int i = 0; i < 1000; ++i) {
        auto d = pt_test::random_distribution(rng);
        double s = score_event(d, w);
        EXPECT_NEAR(s, pt_oracle::score(d.probs, w.weights()), 1e-12);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 2.0);
    }
}

TEST(Score, ClassMismatchIsContractError) {
    SeverityWeights w;
    EXPECT_THROW(score_event({"depression", {{"no", 0.5}, {"yes", 0.5}}}, w), ContractError);
    EXPECT_THROW(score_event({"anxiety", {{"no", 0.2}, {"moderate", 0.5}, {"severe", 0.3}}}, w), ContractError);
}

TEST(Score, ScalingWeightsScalesScore) {
    std::mt19937_64 rng(5);
    SeverityWeights w;
    auto w3 = w.scaled(3.0);
    EXPECT_DOUBLE_EQ(w3.max(), 6.0);
    for (int i = 0; i < 200; ++i) {
        auto d = pt_test::random_distribution(rng);
        EXPECT_NEAR(score_event(d, w3), 3.0 * score_event(d, w), 1e-12);
    }
}

TEST(Weights, NeedTwoDistinctNonNegativeValues) {
    EXPECT_THROW(SeverityWeights({{"a", 1.0}, {"b", 1.0}}), ConfigError);
    EXPECT_THROW(SeverityWeights({{"a", -1.0}, {"b", 1.0}}), ConfigError);
    EXPECT_NO_THROW(SeverityWeights({{"a", 0.0}, {"b", 3.0}}));
}

TEST(Distribution, ValidatesAndRenormalizes) {
    auto d = validate_distribution(dep(0.2, 0.5, 0.3 + 5e-7));
    double total = 0;
    for (auto& [_, p] : d.probs) total += p;
    EXPECT_NEAR(total, 1.0, 1e-15);
    EXPECT_THROW(validate_distribution(dep(0.2, 0.2, 0.3)), ValidationError);
    EXPECT_THROW(validate_distribution(dep(-0.1, 0.6, 0.5)), ValidationError);
    EXPECT_THROW(validate_distribution({"depression", {}}), ValidationError);
}

TEST(Classify, EmptyTimeline) {
    FakeClassifier fake;
    EXPECT_TRUE(classify_events(timeline_of(0), fake, kDims).empty());
    EXPECT_EQ(fake.calls, 0);
}

TEST(Classify, ProbabilityCarriedThrough) {
    FakeClassifier fake;
    fake.reply = dep(0.983, 0.012, 0.005);
    Timeline t{"2714", {pt_test::event("2714", ts("2013-10-04T00:00:00Z"), "post")}};
    auto out = classify_events(t, fake, kDims);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_NEAR(out[0].distribution("depression")->probs.at("no"), 0.983, 1e-12);
}

TEST(Classify, BadSumIsValidationErrorNamingEvent) {
    FakeClassifier fake;
    fake.reply = dep(0.2, 0.2, 0.3);
    Timeline t{"u", {pt_test::event("u", ts("2013-10-04T08:00:00Z"), "post")}};
    try {
        classify_events(t, fake, kDims);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("2013-10-04T08:00:00Z"), std::string::npos) << e.what();
    }
}

TEST(Classify, OrderFollowsTimelineAndConcurrencyBounded) {
    FakeClassifier fake;
    auto t = timeline_of(40);
    ClassifyOptions opts;
    opts.batch_size = 3;
    opts.max_in_flight = 2;
    std::vector<std::string> dims{"depression", "anxiety"};
    auto out = classify_events(t, fake, dims, opts);
    ASSERT_EQ(out.size(), 40u);
    for (int i = 0; i < 40; ++i) {
        EXPECT_EQ(out[static_cast<std::size_t>(i)].event.text, "e" + std::to_string(i));
        EXPECT_EQ(out[static_cast<std::size_t>(i)].distributions.size(), 2u);
    }
    EXPECT_EQ(fake.calls, 14);
    EXPECT_LE(fake.peak, 2);
}

TEST(Classify, DepressionDimensionRequired) {
    FakeClassifier fake;
    std::vector<std::string> dims{"anxiety"};
    EXPECT_THROW(classify_events(timeline_of(1), fake, dims), ContractError);
}

TEST(Precomputed, LookupMissingAndDuplicates) {
    std::istringstream in(
        R"({"user_id":"u","timestamp":"2015-01-01T10:00:00Z","dimension":"depression","probs":{"no":0.9,"moderate":0.1,"severe":0.0}})"
        "\n"
        R"({"user_id":"u","timestamp":"2015-01-02T10:00:00Z","dimension":"depression","probs":{"no":0.5,"moderate":0.5,"severe":0.0}})"
        "\n"
        R"({"user_id":"u","timestamp":"2015-01-02T10:00:00Z","dimension":"depression","probs":{"no":0.0,"moderate":0.5,"severe":0.5}})"
        "\n");
    auto backend = PrecomputedBackend::from_stream(in);
    EXPECT_EQ(backend.size(), 2u);
    ASSERT_EQ(backend.warnings().size(), 1u);
    EXPECT_DOUBLE_EQ(backend.lookup({"u", ts("2015-01-01T10:00:00Z")}, "depression").probs.at("no"), 0.9);
    EXPECT_DOUBLE_EQ(backend.lookup({"u", ts("2015-01-02T10:00:00Z")}, "depression").probs.at("severe"), 0.5);
    try {
        backend.lookup({"u", ts("2015-01-03T10:00:00Z")}, "depression");
        FAIL();
    } catch (const MissingAnnotationError& e) {
        EXPECT_NE(std::string(e.what()).find("u@2015-01-03T10:00:00Z"), std::string::npos);
    }

    Timeline t{"u", {pt_test::event("u", ts("2015-01-01T10:00:00Z"))}};
    auto out = classify_events(t, backend, kDims);
    EXPECT_NEAR(out[0].score, 0.1, 1e-12);
}

TEST(Precomputed, MalformedLineReported) {
    std::istringstream in(
        R"({"user_id":"u","timestamp":"2015-01-01T10:00:00Z","dimension":"depression","probs":{"no":1.0}})"
        "\n{broken\n");
    try {
        PrecomputedBackend::from_stream(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Topics, AttachJoinSemantics) {
    std::vector<EnrichedEvent> events{pt_test::enriched("u", 0, 0.5), pt_test::enriched("u", 0, 0.7),
                                      pt_test::enriched("u", 1, 0.1)};
    EXPECT_EQ(attach_topics(events, {}).size(), 3u);
    for (const auto& e : attach_topics(events, {})) EXPECT_FALSE(e.topics);

    TopicAssignments a{{key_of(events[0].event), {"sleep", "work"}}};
    auto out = attach_topics(events, a);
    // events 0 and 1 share (user, timestamp)
    ASSERT_TRUE(out[0].topics && out[1].topics);
    EXPECT_EQ(*out[1].topics, (std::vector<std::string>{"sleep", "work"}));
    EXPECT_FALSE(out[2].topics);
}

TEST(Topics, ParseMergesRepeatedKeys) {
    std::istringstream in(R"({"user_id":"u","timestamp":"2015-01-01T10:00:00Z","topics":["a"]})"
                          "\n"
                          R"({"user_id":"u","timestamp":"2015-01-01T10:00:00Z","topics":["b"]})"
                          "\n");
    auto a = parse_topic_assignments(in);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a.begin()->second, (std::vector<std::string>{"a", "b"}));
}
