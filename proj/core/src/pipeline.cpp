#include "phasetrace/pipeline.hpp"

#include <cstdlib>

#include "phasetrace/error.hpp"
#include "phasetrace/http_backends.hpp"

namespace phasetrace {
namespace {

std::string env_or(const std::string& value, const char* var) {
    if (!value.empty()) return value;
    const char* v = std::getenv(var);
    return v ? v : "";
}

std::string env_value(const std::string& var) {
    if (var.empty()) return "";
    const char* v = std::getenv(var.c_str());
    return v ? v : "";
}

}  // namespace

std::string_view to_string(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return "full";
        case AblationVariant::noseg: return "noseg";
        case AblationVariant::fixedwin: return "fixedwin";
        case AblationVariant::nosmooth: return "nosmooth";
        case AblationVariant::nostats: return "nostats";
        case AblationVariant::base: return "base";
    }
    return "full";
}

AblationVariant parse_variant(std::string_view tag) {
    if (tag == "traj") return AblationVariant::full;
    for (auto v : kAllVariants) {
        if (to_string(v) == tag) return v;
    }
    throw ConfigError("unknown variant \"" + std::string(tag) +
                      "\" (expected full, noseg, fixedwin, nosmooth, nostats or base)");
}

ReportMode report_mode(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return ReportMode::traj;
        case AblationVariant::noseg: return ReportMode::noseg;
        case AblationVariant::fixedwin: return ReportMode::fixedwin;
        case AblationVariant::nosmooth: return ReportMode::nosmooth;
        case AblationVariant::nostats: return ReportMode::nostats;
        case AblationVariant::base: return ReportMode::base;
    }
    return ReportMode::traj;
}

void PipelineConfig::validate() const {
    if (config_version != kConfigVersion) {
        throw ConfigError("unsupported config_version " + std::to_string(config_version));
    }
    if (smoothing_window < 1 || smoothing_window % 2 == 0) {
        throw ConfigError("smoothing_window must be a positive odd integer");
    }
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(trend_threshold >= 0.0)) throw ConfigError("trend_threshold must be non-negative");
    if (classifier.kind != "precomputed" && classifier.kind != "http") {
        throw ConfigError("classifier.kind must be \"precomputed\" or \"http\"");
    }
    bool has_depression = false;
    for (const auto& d : classifier.dimensions) has_depression |= d == kDepressionDimension;
    if (!has_depression) throw ConfigError("classifier.dimensions must include \"depression\"");
    if (generator.kind != "template" && generator.kind != "http_chat") {
        throw ConfigError("generator.kind must be \"template\" or \"http_chat\"");
    }
    if (generator.max_events_per_prompt < 1) throw ConfigError("generator.max_events_per_prompt must be >= 1");
    if (generator.excerpt_chars < 1) throw ConfigError("generator.excerpt_chars must be >= 1");
}

VariantPlan plan_for(AblationVariant variant, const PipelineConfig& cfg) {
    VariantPlan plan;
    plan.smoothing_window = cfg.smoothing_window;
    plan.segmentation = SegmentationMethod::topdown;
    plan.include_stats = true;
    plan.mode = report_mode(variant);
    switch (variant) {
        case AblationVariant::full: break;
        case AblationVariant::noseg: plan.segmentation = SegmentationMethod::whole; break;
        case AblationVariant::fixedwin: plan.segmentation = SegmentationMethod::fixed_window; break;
        case AblationVariant::nosmooth: plan.smoothing_window = 1; break;
        case AblationVariant::nostats: plan.include_stats = false; break;
        case AblationVariant::base: plan.segmentation.reset(); break;
    }
    return plan;
}

std::vector<EnrichedEvent> enrich_timeline(const Timeline& timeline, ClassifierBackend& classifier,
                                           const PipelineConfig& cfg, const TopicAssignments* topics) {
    ClassifyOptions options{cfg.weights, cfg.classifier.batch_size, cfg.classifier.max_in_flight};
    auto enriched = classify_events(timeline, classifier, cfg.classifier.dimensions, options);
    if (topics) enriched = attach_topics(std::move(enriched), *topics);
    return enriched;
}

DailySeries build_series(std::span<const EnrichedEvent> enriched, const VariantPlan& plan) {
    return smooth(aggregate_daily(enriched), plan.smoothing_window);
}

std::optional<Segmentation> segment_for(const DailySeries& series, const VariantPlan& plan,
                                        const PipelineConfig& cfg) {
    if (!plan.segmentation) return std::nullopt;
    return segment_series(series, *plan.segmentation, {cfg.k, cfg.trend_threshold});
}

GlobalReport report_for(GenerationBackend& generator, const std::string& user_id,
                        std::span<const EnrichedEvent> enriched, const std::optional<Segmentation>& segmentation,
                        const VariantPlan& plan, const PipelineConfig& cfg, const PromptSet& prompts,
                        const std::vector<std::string>& context_documents) {
    ReportOptions options;
    options.prompt.max_events_per_prompt = cfg.generator.max_events_per_prompt;
    options.prompt.excerpt_chars = cfg.generator.excerpt_chars;
    options.prompt.context_documents = context_documents;
    options.max_parallel = cfg.generator.max_parallel;
    options.prompts = &prompts;
    if (!segmentation) return generate_baseline_report(generator, user_id, enriched, options);
    return generate_trajectory_report(generator, user_id, plan.mode, *segmentation, enriched, plan.include_stats,
                                      options);
}

UserAnalysis analyze_user(const Timeline& timeline, ClassifierBackend& classifier, GenerationBackend& generator,
                          const PipelineConfig& cfg, AblationVariant variant, const TopicAssignments* topics) {
    const VariantPlan plan = plan_for(variant, cfg);
    UserAnalysis out;
    out.timeline = timeline;
    out.enriched = enrich_timeline(timeline, classifier, cfg, topics);
    out.series = build_series(out.enriched, plan);
    out.segmentation = segment_for(out.series, plan, cfg);
    const PromptSet prompts = make_prompts(cfg.generator);
    out.report = report_for(generator, timeline.user_id, out.enriched, out.segmentation, plan, cfg, prompts);
    return out;
}

std::unique_ptr<ClassifierBackend> make_classifier(const ClassifierConfig& cfg) {
    if (cfg.kind == "precomputed") {
        if (cfg.annotations.empty()) throw ConfigError("classifier.annotations path is required");
        return std::make_unique<PrecomputedBackend>(load_precomputed(cfg.annotations));
    }
    if (cfg.kind == "http") {
        HttpSettings s;
        s.url = env_or(cfg.url, "PHASETRACE_CLASSIFIER_URL");
        s.token = env_value(cfg.token_env);
        s.timeout_seconds = cfg.timeout_seconds;
        s.max_retries = cfg.max_retries;
        if (s.url.empty()) throw ConfigError("classifier.url (or $PHASETRACE_CLASSIFIER_URL) is required");
        return std::make_unique<HttpClassifierBackend>(std::move(s));
    }
    throw ConfigError("unknown classifier kind \"" + cfg.kind + "\"");
}

std::unique_ptr<GenerationBackend> make_generator(const GeneratorConfig& cfg) {
    if (cfg.kind == "template") return std::make_unique<TemplateBackend>();
    if (cfg.kind == "http_chat") {
        HttpSettings s;
        s.url = env_or(cfg.url, "PHASETRACE_LLM_URL");
        s.token = env_value(cfg.api_key_env);
        s.timeout_seconds = cfg.timeout_seconds;
        s.max_retries = cfg.max_retries;
        if (s.url.empty()) throw ConfigError("generator.url (or $PHASETRACE_LLM_URL) is required");
        std::string model = env_or(cfg.model, "PHASETRACE_LLM_MODEL");
        return std::make_unique<HttpChatBackend>(std::move(s), std::move(model), cfg.temperature);
    }
    throw ConfigError("unknown generator kind \"" + cfg.kind + "\"");
}

PromptSet make_prompts(const GeneratorConfig& cfg) {
    if (cfg.prompt_dir.empty()) return PromptSet::builtin();
    return PromptSet::load(cfg.prompt_dir);
}

}  // namespace phasetrace
