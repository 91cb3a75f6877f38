/// @file store.hpp
/// @brief Directory-per-user artifact store and the batch pipeline runner.
///
///     <root>/manifest.json
///     <root>/rejections.jsonl
///     <root>/failures.jsonl
///     <root>/users/<encoded id>/timeline.jsonl
///                              /enriched.jsonl
///                              /trajectory.jsonl
///                              /segmentation/<variant>.jsonl
///                              /reports/<variant>.json
///                              /notes.jsonl
///                              /index.json
///
/// JSONL artifacts start with a `{"header": {...}}` line carrying the format
/// version, the artifact name and the hash of the producing config. Files are
/// written to a temporary name and renamed into place.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/ingestion.hpp"
#include "phasetrace/pipeline.hpp"
#include "phasetrace/reporting.hpp"
#include "phasetrace/retrieval.hpp"
#include "phasetrace/segmentation.hpp"
#include "phasetrace/serialization.hpp"
#include "phasetrace/trajectory.hpp"

namespace phasetrace {

inline constexpr int kArtifactFormatVersion = 1;

struct UserFailure {
    std::string user_id;
    std::string stage;    ///< ingest | enrich | trajectory | segment | report
    std::string variant;  ///< empty for variant-independent stages
    std::string error;

    bool operator==(const UserFailure&) const = default;
};

class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Percent-encodes every byte outside [A-Za-z0-9_-].
    static std::string encode_user_id(std::string_view user_id);
    /// Throws ValidationError on a malformed escape.
    static std::string decode_user_id(std::string_view encoded);

    std::filesystem::path user_dir(std::string_view user_id) const;

    /// Users with a stored timeline, sorted.
    std::vector<std::string> users() const;
    bool has_user(std::string_view user_id) const;

    void write_manifest(const PipelineConfig& cfg, const std::string& prompt_version) const;
    std::optional<Json> read_manifest() const;

    void write_rejections(std::span<const Rejection> rejections, const std::string& config_hash) const;
    void write_failures(std::span<const UserFailure> failures, const std::string& config_hash) const;
    std::vector<UserFailure> read_failures() const;

    void write_timeline(const Timeline& timeline, const std::string& config_hash) const;
    Timeline read_timeline(std::string_view user_id) const;

    void write_enriched(std::string_view user_id, std::span<const EnrichedEvent> events,
                        const std::string& config_hash) const;
    std::vector<EnrichedEvent> read_enriched(std::string_view user_id) const;

    void write_series(const DailySeries& series, const std::string& config_hash) const;
    DailySeries read_series(std::string_view user_id) const;

    void write_segmentation(std::string_view user_id, AblationVariant variant, const Segmentation& segmentation,
                            const std::string& config_hash) const;
    /// nullopt when the variant has no segmentation artifact.
    std::optional<Segmentation> read_segmentation(std::string_view user_id, AblationVariant variant) const;
    void remove_segmentation(std::string_view user_id, AblationVariant variant) const;

    void write_report(AblationVariant variant, const GlobalReport& report, const std::string& config_hash) const;
    std::optional<GlobalReport> read_report(std::string_view user_id, AblationVariant variant) const;
    std::vector<AblationVariant> report_variants(std::string_view user_id) const;

    void write_notes(std::string_view user_id, std::span<const Note> notes, const std::string& config_hash) const;
    std::vector<Note> read_notes(std::string_view user_id) const;

    void write_index_metadata(const EvidenceIndex& index, const std::string& config_hash) const;

private:
    std::filesystem::path root_;
};

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Evidence index from the stored enriched events, the full-variant
/// segmentation and phase reports (when present) and the user's notes.
EvidenceIndex build_user_index(const ArtifactStore& store, std::string_view user_id);

struct RunInputs {
    std::filesystem::path events;
    InputFormat format = InputFormat::jsonl;
    std::optional<std::filesystem::path> topics;  ///< per-event topic assignments
    std::optional<std::filesystem::path> notes;   ///< JSONL {user_id, key, date?, text}
};

struct RunOptions {
    std::vector<std::string> users;         ///< empty: every user
    std::vector<AblationVariant> variants;  ///< empty: cfg.variant
    ClassifierBackend* classifier = nullptr;  ///< overrides the configured backend
    GenerationBackend* generator = nullptr;   ///< overrides the configured backend
};

struct RunSummary {
    std::vector<std::string> succeeded;  ///< sorted
    std::vector<UserFailure> failures;   ///< sorted by user, then stage order
    std::size_t rejections = 0;
};

/// Parses and prepares the input, then writes timelines, notes and
/// rejections. Users present in the input that end up without a timeline are
/// reported as ingest failures.
RunSummary stage_ingest(const PipelineConfig& cfg, const RunInputs& inputs, const ArtifactStore& store,
                        const std::vector<std::string>& users = {});

/// Per-user stages over stored artifacts. Each runs users in parallel and
/// isolates failures.
RunSummary stage_enrich(const PipelineConfig& cfg, const ArtifactStore& store, ClassifierBackend& classifier,
                        const std::vector<std::string>& users, const TopicAssignments* topics = nullptr);
RunSummary stage_trajectory(const PipelineConfig& cfg, const ArtifactStore& store,
                            const std::vector<std::string>& users);
RunSummary stage_segment(const PipelineConfig& cfg, const ArtifactStore& store, const std::vector<std::string>& users,
                         AblationVariant variant);
RunSummary stage_report(const PipelineConfig& cfg, const ArtifactStore& store, GenerationBackend& generator,
                        const std::vector<std::string>& users, AblationVariant variant);

/// ingest, then per user enrich → trajectory → segment → report for every
/// requested variant. Writes the manifest and the failure list.
RunSummary run_pipeline(const PipelineConfig& cfg, const RunInputs& inputs, const ArtifactStore& store,
                        const RunOptions& options = {});

}  // namespace phasetrace
