/// @file generation.hpp
/// @brief Text-generation backends and the versioned prompt set.
///
/// Each request carries both the rendered prompt (what a chat model sees) and
/// the structured payload it was rendered from. Remote backends send the
/// prompt; the deterministic template backend works from the payload so its
/// output is reproducible byte for byte.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phasetrace/ingestion.hpp"
#include "phasetrace/segmentation.hpp"

namespace phasetrace {

/// Versioned prompt templates. Placeholders are written `{{name}}`.
class PromptSet {
public:
    /// Templates compiled into the library from core/prompts/<version>/.
    static const PromptSet& builtin();

    /// Loads every `*.txt` from `dir`; the directory name is the version.
    static PromptSet load(const std::filesystem::path& dir);

    const std::string& version() const noexcept { return version_; }

    /// Throws ConfigError for an unknown template name.
    const std::string& get(std::string_view name) const;

    /// Substitutes `{{key}}` placeholders. Throws ConfigError on a placeholder
    /// without a value.
    std::string render(std::string_view name, const std::map<std::string, std::string>& values) const;

    PromptSet(std::string version, std::map<std::string, std::string, std::less<>> templates);

private:
    std::string version_;
    std::map<std::string, std::string, std::less<>> templates_;
};

struct EventExcerpt {
    EventKey key;
    std::string text;  ///< truncated to the excerpt budget
};

struct SegmentRef {
    std::size_t first = 0;
    std::size_t last = 0;
    Date start_date;
    Date end_date;
    std::size_t position = 1;
    std::size_t total = 1;

    bool operator==(const SegmentRef&) const = default;
};

SegmentRef ref_of(const Segment& segment);

/// "Phase k (from YYYY-MM-DD to YYYY-MM-DD)"
std::string phase_header(const SegmentRef& ref);

struct PhaseRequest {
    Segment segment;
    bool include_stats = true;
    std::size_t event_count = 0;
    std::vector<EventExcerpt> excerpts;
};

struct ComposeRequest {
    std::vector<SegmentRef> segments;
    std::vector<std::string> phase_texts;
};

struct BaselineRequest {
    std::size_t event_count = 0;
    std::vector<EventExcerpt> excerpts;
};

struct Citation {
    std::string key;
    std::string date;  ///< "YYYY-MM-DD" or "YYYY-MM-DD..YYYY-MM-DD"; empty when undated
    std::string excerpt;
};

struct AnswerRequest {
    std::string question;
    std::vector<Citation> evidence;
};

struct JudgeRequest {
    std::string report_1;
    std::string report_2;
};

struct CoverageRequest {
    std::string topic;
    std::string report;
};

using GenerationPayload =
    std::variant<PhaseRequest, ComposeRequest, BaselineRequest, AnswerRequest, JudgeRequest, CoverageRequest>;

struct GenerationRequest {
    std::string prompt;
    GenerationPayload payload;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;

    /// Must be safe to call concurrently. Throws TransportError on failure.
    virtual std::string complete(const GenerationRequest& request) = 0;

    virtual std::string name() const = 0;
};

/// Offline backend: fixed templates over the structured payload.
///
/// - phase: "Phase k (from A to B): mean severity m, trend t; c events;
///   representative excerpts: ..." (descriptors omitted without stats)
/// - compose: one line naming the dominant trend found in the phase texts
/// - answer: lists the supplied evidence keys with dates
/// - judge: scores each report from surface features (phase headers, dates,
///   trend statements, excerpts) and replies in the judge response grammar
/// - coverage: case-insensitive keyword containment, "yes" / "no"
class TemplateBackend final : public GenerationBackend {
public:
    std::string complete(const GenerationRequest& request) override;
    std::string name() const override { return "template"; }
};

/// Keeps at most `max_chars` code points; appends "..." when shortened.
std::string truncate_utf8(std::string_view text, std::size_t max_chars);

}  // namespace phasetrace
