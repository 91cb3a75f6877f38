/// @file pipeline.hpp
/// @brief Pipeline configuration, ablation variants and per-user execution
/// of ingest → enrich → trajectory → segment → report.

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/generation.hpp"
#include "phasetrace/ingestion.hpp"
#include "phasetrace/reporting.hpp"
#include "phasetrace/segmentation.hpp"
#include "phasetrace/trajectory.hpp"

namespace phasetrace {

inline constexpr int kConfigVersion = 1;

enum class AblationVariant { full, noseg, fixedwin, nosmooth, nostats, base };

inline constexpr AblationVariant kAllVariants[] = {AblationVariant::full,     AblationVariant::noseg,
                                                   AblationVariant::fixedwin, AblationVariant::nosmooth,
                                                   AblationVariant::nostats,  AblationVariant::base};

std::string_view to_string(AblationVariant v);
/// Accepts the tags above plus "traj" as an alias of "full". Throws ConfigError.
AblationVariant parse_variant(std::string_view tag);
ReportMode report_mode(AblationVariant v);

struct ClassifierConfig {
    std::string kind = "precomputed";  ///< "precomputed" | "http"
    std::string annotations;           ///< precomputed JSONL path
    std::string url;                   ///< http base URL; falls back to $PHASETRACE_CLASSIFIER_URL
    std::string token_env = "PHASETRACE_CLASSIFIER_TOKEN";
    std::vector<std::string> dimensions{"depression"};
    std::size_t batch_size = 16;
    std::size_t max_in_flight = 8;
    int timeout_seconds = 30;
    int max_retries = 2;

    bool operator==(const ClassifierConfig&) const = default;
};

struct GeneratorConfig {
    std::string kind = "template";  ///< "template" | "http_chat"
    std::string url;                ///< falls back to $PHASETRACE_LLM_URL
    std::string model;              ///< falls back to $PHASETRACE_LLM_MODEL
    std::string api_key_env = "PHASETRACE_LLM_API_KEY";
    double temperature = 0.0;
    int timeout_seconds = 120;
    int max_retries = 2;
    std::size_t max_parallel = 4;
    std::size_t max_events_per_prompt = kDefaultMaxEventsPerPrompt;
    std::size_t excerpt_chars = kDefaultExcerptChars;
    std::string prompt_dir;  ///< empty: templates compiled into the library

    bool operator==(const GeneratorConfig&) const = default;
};

struct PipelineConfig {
    int config_version = kConfigVersion;
    PrepConfig prep;
    SeverityWeights weights;
    int smoothing_window = kDefaultSmoothingWindow;
    std::size_t k = kDefaultMaxSegments;
    double trend_threshold = kDefaultTrendThreshold;
    ClassifierConfig classifier;
    GeneratorConfig generator;
    AblationVariant variant = AblationVariant::full;
    std::size_t user_parallelism = 4;

    /// Throws ConfigError when a component invariant is violated.
    void validate() const;
};

/// What a variant changes relative to the full pipeline. Every variant runs
/// the same stage code; only these switches differ.
struct VariantPlan {
    int smoothing_window = kDefaultSmoothingWindow;
    std::optional<SegmentationMethod> segmentation;  ///< nullopt: no segmentation (base)
    bool include_stats = true;
    ReportMode mode = ReportMode::traj;
};

VariantPlan plan_for(AblationVariant variant, const PipelineConfig& cfg);

/// Stage outputs for one user under one variant.
struct UserAnalysis {
    Timeline timeline;
    std::vector<EnrichedEvent> enriched;
    DailySeries series;
    std::optional<Segmentation> segmentation;
    GlobalReport report;
};

std::vector<EnrichedEvent> enrich_timeline(const Timeline& timeline, ClassifierBackend& classifier,
                                           const PipelineConfig& cfg, const TopicAssignments* topics = nullptr);

DailySeries build_series(std::span<const EnrichedEvent> enriched, const VariantPlan& plan);

std::optional<Segmentation> segment_for(const DailySeries& series, const VariantPlan& plan, const PipelineConfig& cfg);

GlobalReport report_for(GenerationBackend& generator, const std::string& user_id,
                        std::span<const EnrichedEvent> enriched, const std::optional<Segmentation>& segmentation,
                        const VariantPlan& plan, const PipelineConfig& cfg, const PromptSet& prompts,
                        const std::vector<std::string>& context_documents = {});

/// Runs every stage in memory.
UserAnalysis analyze_user(const Timeline& timeline, ClassifierBackend& classifier, GenerationBackend& generator,
                          const PipelineConfig& cfg, AblationVariant variant,
                          const TopicAssignments* topics = nullptr);

/// Backends as described by `cfg`; credentials are read from the environment.
std::unique_ptr<ClassifierBackend> make_classifier(const ClassifierConfig& cfg);
std::unique_ptr<GenerationBackend> make_generator(const GeneratorConfig& cfg);
PromptSet make_prompts(const GeneratorConfig& cfg);

}  // namespace phasetrace
