/// @file likert.hpp
/// @brief Judge criteria and the line-oriented judge response grammar.
///
///     Report 1
///     Trajectory Coverage: 4/5
///     Temporal Coherence: 3/5
///     Sensitivity to Change Points: 2/5
///     Segment-Level Specificity: 4/5
///     Overall Preference: 3/5
///     Report 2
///     ...
///
/// Parsing tolerates markdown decoration (`## Report 1`, `**Trajectory
/// Coverage**: 4`), case differences and a missing "/5".

#pragma once

#include <array>
#include <string>
#include <string_view>

namespace phasetrace {

enum class Criterion {
    trajectory_coverage,
    temporal_coherence,
    change_point_sensitivity,
    segment_specificity,
    overall_preference,
};

inline constexpr std::array<Criterion, 5> kCriteria{
    Criterion::trajectory_coverage, Criterion::temporal_coherence, Criterion::change_point_sensitivity,
    Criterion::segment_specificity, Criterion::overall_preference};

/// snake_case key used in JSON artifacts
std::string_view criterion_key(Criterion c);
/// name used in the judge prompt and response grammar
std::string_view criterion_label(Criterion c);
/// row label for aggregated tables
std::string_view criterion_row_label(Criterion c);

/// Indexed in `kCriteria` order; each value in 1..5.
using LikertScores = std::array<int, 5>;

std::string format_judge_response(const LikertScores& report_1, const LikertScores& report_2);

struct ParsedJudgeResponse {
    LikertScores report_1{};
    LikertScores report_2{};
};

/// Throws ParseError naming the first missing or invalid item.
ParsedJudgeResponse parse_judge_response(std::string_view text);

}  // namespace phasetrace
