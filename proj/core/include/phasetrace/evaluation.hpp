/// @file evaluation.hpp
/// @brief Topic coverage, pairwise LLM-as-a-judge comparison, verdict
/// aggregation and ablation variant runs.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phasetrace/error.hpp"
#include "phasetrace/generation.hpp"
#include "phasetrace/likert.hpp"
#include "phasetrace/pipeline.hpp"
#include "phasetrace/serialization.hpp"

namespace phasetrace {

/// A metric was requested on input for which it is not defined.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// The judge reply could not be parsed even after the reprompt.
class JudgeParseError : public ParseError {
public:
    JudgeParseError(const std::string& what, std::string raw_response)
        : ParseError(what), raw_response_(std::move(raw_response)) {}

    const std::string& raw_response() const noexcept { return raw_response_; }

private:
    std::string raw_response_;
};

/// A pipeline failure while running one ablation variant.
class VariantError : public Error {
public:
    VariantError(AblationVariant variant, const std::string& what)
        : Error("variant " + std::string(to_string(variant)) + ": " + what), variant_(variant) {}

    AblationVariant variant() const noexcept { return variant_; }

private:
    AblationVariant variant_;
};

// -- topic coverage ----------------------------------------------------------

struct CoverageResult {
    std::size_t covered = 0;
    std::size_t total = 0;
    std::vector<bool> per_topic;  ///< aligned with the input topics

    double fraction() const { return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total); }
};

/// "yes" / "no" at the start of a reply, ignoring case, whitespace and
/// punctuation. Throws ParseError otherwise.
bool parse_yes_no(std::string_view reply);

/// Asks `judge` once per topic. Throws UndefinedMetricError when `topics` is empty.
CoverageResult assess_topic_coverage(std::string_view report_text, std::span<const std::string> topics,
                                     GenerationBackend& judge, const PromptSet& prompts = PromptSet::builtin());

double topic_coverage(std::string_view report_text, std::span<const std::string> topics, GenerationBackend& judge,
                      const PromptSet& prompts = PromptSet::builtin());

/// user_id -> topic labels. JSONL lines `{"user_id": ..., "topics": [...]}`.
using UserTopics = std::map<std::string, std::vector<std::string>>;
UserTopics parse_user_topics(std::istream& in);
UserTopics load_user_topics(const std::filesystem::path& path);

// -- pairwise judging --------------------------------------------------------

enum class PresentationOrder { AB, BA };

std::string_view to_string(PresentationOrder order);

/// Draws the order from a mt19937_64 seeded with `seed`.
PresentationOrder presentation_order(std::uint64_t seed);

/// Mixes a base seed with a user and judge so every comparison gets its own
/// reproducible order.
std::uint64_t comparison_seed(std::uint64_t base, std::string_view user_id, std::string_view judge_id);

struct JudgeVerdict {
    std::string judge_id;
    LikertScores report_a{};
    LikertScores report_b{};
    PresentationOrder order = PresentationOrder::AB;
    std::string raw_response;

    bool operator==(const JudgeVerdict&) const = default;
};

std::string render_judge_prompt(std::string_view report_1, std::string_view report_2,
                                const PromptSet& prompts = PromptSet::builtin());

/// Shows the reports as "Report 1" / "Report 2" in the seeded order, parses the
/// reply and maps the scores back to A and B. One reprompt on a parse failure,
/// then JudgeParseError carrying the last raw reply.
JudgeVerdict judge_compare(std::string_view report_a, std::string_view report_b, GenerationBackend& judge,
                           std::uint64_t seed, std::string judge_id = {},
                           const PromptSet& prompts = PromptSet::builtin());

struct ReportPair {
    std::string user_id;
    std::string report_a;
    std::string report_b;
};

struct NamedJudge {
    std::string judge_id;
    GenerationBackend* backend = nullptr;
};

struct JudgedPair {
    std::string user_id;
    JudgeVerdict verdict;
};

/// Every pair judged by every judge, at most `max_parallel` calls at a time.
/// Results are pair-major, judges in input order. Each comparison is seeded
/// with comparison_seed(seed, user, judge).
std::vector<JudgedPair> judge_all(std::span<const ReportPair> pairs, std::span<const NamedJudge> judges,
                                  std::uint64_t seed, std::size_t max_parallel,
                                  const PromptSet& prompts = PromptSet::builtin());

/// Per-criterion means over the verdicts (unrounded).
struct VerdictTable {
    std::size_t count = 0;
    std::array<double, 5> mean_a{};
    std::array<double, 5> mean_b{};
};

/// Throws ContractError on an empty list.
VerdictTable aggregate_verdicts(std::span<const JudgeVerdict> verdicts);

/// One decimal, half away from zero.
double round_display(double value);

Json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const Json& j);

/// A judge column of the Base-vs-Traj table: report A is the trajectory
/// report, report B the baseline.
struct JudgeColumn {
    std::string judge_id;
    VerdictTable table;
};

/// Criterion rows; per judge a Base and a Traj column.
std::string criterion_table_csv(std::span<const JudgeColumn> columns);
Json criterion_table_json(std::span<const JudgeColumn> columns);

struct VariantRow {
    std::string variant;
    std::array<double, 5> means{};
};

/// Ablation rows from verdicts comparing each variant (A) against the base
/// report (B). Variant rows use A means; a final "base" row uses the B means
/// pooled over every comparison. Throws ContractError when a variant has no verdicts.
std::vector<VariantRow> variant_rows(const std::vector<std::pair<AblationVariant, std::vector<JudgeVerdict>>>& runs);

/// Variant rows; one column per criterion.
std::string variant_table_csv(std::span<const VariantRow> rows);
Json variant_table_json(std::span<const VariantRow> rows);

// -- ablation ----------------------------------------------------------------

/// The full pipeline for one user under `variant`. Pipeline errors are
/// rethrown as VariantError.
GlobalReport run_variant(AblationVariant variant, const Timeline& timeline, ClassifierBackend& classifier,
                         GenerationBackend& generator, const PipelineConfig& cfg,
                         const TopicAssignments* topics = nullptr);

}  // namespace phasetrace
