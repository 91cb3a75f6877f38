/// @file reporting.hpp
/// @brief Phase prompts, per-phase reports, global composition and the
/// direct-summarization baseline.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/generation.hpp"
#include "phasetrace/segmentation.hpp"

namespace phasetrace {

inline constexpr std::size_t kDefaultMaxEventsPerPrompt = 200;
inline constexpr std::size_t kDefaultExcerptChars = 400;

enum class ReportMode { traj, base, noseg, fixedwin, nosmooth, nostats };

std::string_view to_string(ReportMode mode);
ReportMode parse_report_mode(std::string_view text);

struct PromptOptions {
    std::size_t max_events_per_prompt = kDefaultMaxEventsPerPrompt;
    std::size_t excerpt_chars = kDefaultExcerptChars;
    /// Optional operator notes or other external context, rendered in a "Context" block.
    std::vector<std::string> context_documents;
};

struct ReportOptions {
    PromptOptions prompt;
    std::size_t max_parallel = 4;
    const PromptSet* prompts = nullptr;  ///< builtin set when null
};

struct PhasePrompt {
    std::string text;
    std::size_t event_count = 0;         ///< events in the segment
    std::vector<EventExcerpt> excerpts;  ///< events shown, chronological
};

/// Indices of `count` items kept when at most `limit` may be shown: evenly
/// spaced over the chronological order, always including the first and last.
std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t limit);

/// Events whose calendar day falls inside the segment's dates (boundary days
/// belong to both neighbouring segments). Input must be chronological.
std::vector<EnrichedEvent> events_in_segment(std::span<const EnrichedEvent> events, const Segment& segment);

/// Throws ContractError when an event lies outside the segment's dates.
PhasePrompt build_phase_prompt(const Segment& segment, std::span<const EnrichedEvent> events, bool include_stats,
                               const PromptOptions& options = {}, const PromptSet& prompts = PromptSet::builtin());

/// Raw texts and dates only; never mentions segments or descriptors.
PhasePrompt build_baseline_prompt(std::span<const EnrichedEvent> events, const PromptOptions& options = {},
                                  const PromptSet& prompts = PromptSet::builtin());

struct PhaseReport {
    SegmentRef segment;
    std::string text;
    std::vector<EventKey> evidence;  ///< events shown in the phase prompt

    bool operator==(const PhaseReport&) const = default;
};

struct GlobalReport {
    std::string user_id;
    ReportMode mode = ReportMode::traj;
    std::vector<PhaseReport> phases;  ///< empty in base mode
    std::string overall;
    std::string prompt_version;

    bool operator==(const GlobalReport&) const = default;
};

/// Throws ValidationError on an empty reply; TransportError from the backend
/// is rethrown with the phase header prepended.
PhaseReport generate_phase_report(GenerationBackend& backend, const Segment& segment,
                                  std::span<const EnrichedEvent> events, bool include_stats,
                                  const PromptOptions& options = {},
                                  const PromptSet& prompts = PromptSet::builtin());

/// Second-stage call over phase texts only. Throws ContractError when `phases`
/// is empty or not in strictly increasing start-date order.
GlobalReport compose_global_report(GenerationBackend& backend, std::string user_id, ReportMode mode,
                                   std::vector<PhaseReport> phases,
                                   const PromptSet& prompts = PromptSet::builtin());

/// Per-phase reports (concurrent, bounded) followed by composition.
GlobalReport generate_trajectory_report(GenerationBackend& backend, const std::string& user_id, ReportMode mode,
                                        const Segmentation& segmentation, std::span<const EnrichedEvent> events,
                                        bool include_stats, const ReportOptions& options = {});

/// Single-call summary of the raw timeline. Throws ContractError on no events.
GlobalReport generate_baseline_report(GenerationBackend& backend, const std::string& user_id,
                                      std::span<const EnrichedEvent> events, const ReportOptions& options = {});

/// Phase blocks separated by blank lines, then "Overall summary:" and the
/// overall text. Base-mode reports render as the overall text alone.
std::string render_report_text(const GlobalReport& report);

}  // namespace phasetrace
