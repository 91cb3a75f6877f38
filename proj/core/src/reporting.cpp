#include "phasetrace/reporting.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "parallel.hpp"
#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

const PromptSet& prompts_or_builtin(const PromptSet* p) { return p ? *p : PromptSet::builtin(); }

std::vector<EventExcerpt> make_excerpts(std::span<const EnrichedEvent> events, const PromptOptions& options) {
    std::vector<EventExcerpt> out;
    for (std::size_t i : subsample_indices(events.size(), options.max_events_per_prompt)) {
        out.push_back({key_of(events[i].event), truncate_utf8(events[i].event.text, options.excerpt_chars)});
    }
    return out;
}

std::string render_events(const std::vector<EventExcerpt>& excerpts) {
    std::string out;
    for (const auto& e : excerpts) {
        if (!out.empty()) out += "\n";
        out += fmt::format("[{}] {}", format_date(to_date(e.key.timestamp)), e.text);
    }
    return out;
}

std::string render_context(const PromptOptions& options, const PromptSet& prompts) {
    if (options.context_documents.empty()) return "";
    std::string docs;
    for (const auto& d : options.context_documents) {
        if (!docs.empty()) docs += "\n";
        docs += "- " + d;
    }
    return prompts.render("context", {{"documents", docs}});
}

std::string complete_checked(GenerationBackend& backend, GenerationRequest request, const std::string& what) {
    std::string text;
    try {
        text = backend.complete(request);
    } catch (const TransportError& e) {
        throw TransportError(what + ": " + e.what());
    }
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ValidationError(what + ": generation backend returned an empty reply");
    }
    return text;
}

}  // namespace

std::string_view to_string(ReportMode mode) {
    switch (mode) {
        case ReportMode::traj: return "traj";
        case ReportMode::base: return "base";
        case ReportMode::noseg: return "noseg";
        case ReportMode::fixedwin: return "fixedwin";
        case ReportMode::nosmooth: return "nosmooth";
        case ReportMode::nostats: return "nostats";
    }
    return "traj";
}

ReportMode parse_report_mode(std::string_view text) {
    for (auto m : {ReportMode::traj, ReportMode::base, ReportMode::noseg, ReportMode::fixedwin,
                   ReportMode::nosmooth, ReportMode::nostats}) {
        if (to_string(m) == text) return m;
    }
    throw ParseError("unknown report mode \"" + std::string(text) + "\"");
}

std::vector<std::size_t> subsample_indices(std::size_t count, std::size_t limit) {
    std::vector<std::size_t> out;
    if (count == 0 || limit == 0) return out;
    if (count <= limit) {
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = i;
        return out;
    }
    if (limit == 1) return {0};
    out.reserve(limit);
    // round(i * (count-1) / (limit-1)); the step is >= 1 so indices stay distinct
    for (std::size_t i = 0; i < limit; ++i) {
        out.push_back((i * (count - 1) * 2 + (limit - 1)) / (2 * (limit - 1)));
    }
    return out;
}

std::vector<EnrichedEvent> events_in_segment(std::span<const EnrichedEvent> events, const Segment& segment) {
    std::vector<EnrichedEvent> out;
    for (const auto& e : events) {
        Date d = to_date(e.event.timestamp);
        if (d >= segment.start_date && d <= segment.end_date) out.push_back(e);
    }
    return out;
}

PhasePrompt build_phase_prompt(const Segment& segment, std::span<const EnrichedEvent> events, bool include_stats,
                               const PromptOptions& options, const PromptSet& prompts) {
    for (const auto& e : events) {
        Date d = to_date(e.event.timestamp);
        if (d < segment.start_date || d > segment.end_date) {
            throw ContractError("event " + key_of(e.event).str() + " lies outside " + phase_header(ref_of(segment)));
        }
    }
    PhasePrompt out;
    out.event_count = events.size();
    out.excerpts = make_excerpts(events, options);

    std::string descriptors;
    if (include_stats) {
        descriptors = prompts.render("descriptors", {{"mean_severity", fmt::format("{:.3f}", segment.mean_severity)},
                                                     {"trend", std::string(to_string(segment.trend))},
                                                     {"slope", fmt::format("{:+.4f}", segment.slope)}});
    }
    std::string listed = out.excerpts.empty() ? "No activity recorded in this phase." : render_events(out.excerpts);
    out.text = prompts.render("phase", {{"preamble", prompts.get("preamble")},
                                        {"position", std::to_string(segment.position)},
                                        {"total", std::to_string(segment.total)},
                                        {"start_date", format_date(segment.start_date)},
                                        {"end_date", format_date(segment.end_date)},
                                        {"descriptors", descriptors},
                                        {"context", render_context(options, prompts)},
                                        {"event_count", std::to_string(out.event_count)},
                                        {"excerpt_count", std::to_string(out.excerpts.size())},
                                        {"events", listed}});
    return out;
}

PhasePrompt build_baseline_prompt(std::span<const EnrichedEvent> events, const PromptOptions& options,
                                  const PromptSet& prompts) {
    PhasePrompt out;
    out.event_count = events.size();
    out.excerpts = make_excerpts(events, options);
    out.text = prompts.render("base", {{"preamble", prompts.get("preamble")},
                                       {"context", render_context(options, prompts)},
                                       {"event_count", std::to_string(out.event_count)},
                                       {"excerpt_count", std::to_string(out.excerpts.size())},
                                       {"events", render_events(out.excerpts)}});
    return out;
}

PhaseReport generate_phase_report(GenerationBackend& backend, const Segment& segment,
                                  std::span<const EnrichedEvent> events, bool include_stats,
                                  const PromptOptions& options, const PromptSet& prompts) {
    PhasePrompt prompt = build_phase_prompt(segment, events, include_stats, options, prompts);
    PhaseRequest payload{segment, include_stats, prompt.event_count, prompt.excerpts};
    PhaseReport report;
    report.segment = ref_of(segment);
    report.text = complete_checked(backend, {std::move(prompt.text), std::move(payload)}, phase_header(report.segment));
    for (const auto& e : prompt.excerpts) report.evidence.push_back(e.key);
    return report;
}

GlobalReport compose_global_report(GenerationBackend& backend, std::string user_id, ReportMode mode,
                                   std::vector<PhaseReport> phases, const PromptSet& prompts) {
    if (phases.empty()) throw ContractError("compose_global_report: no phase reports");
    for (std::size_t i = 1; i < phases.size(); ++i) {
        if (!(phases[i - 1].segment.start_date < phases[i].segment.start_date)) {
            throw ContractError("compose_global_report: phase reports are not in chronological order");
        }
    }
    ComposeRequest payload;
    std::string listed;
    for (const auto& p : phases) {
        payload.segments.push_back(p.segment);
        payload.phase_texts.push_back(p.text);
        if (!listed.empty()) listed += "\n\n";
        listed += p.text;
    }
    std::string prompt = prompts.render("compose", {{"preamble", prompts.get("preamble")}, {"phases", listed}});

    GlobalReport report;
    report.user_id = std::move(user_id);
    report.mode = mode;
    report.overall = complete_checked(backend, {std::move(prompt), std::move(payload)}, "global report composition");
    report.phases = std::move(phases);
    report.prompt_version = prompts.version();
    return report;
}

GlobalReport generate_trajectory_report(GenerationBackend& backend, const std::string& user_id, ReportMode mode,
                                        const Segmentation& segmentation, std::span<const EnrichedEvent> events,
                                        bool include_stats, const ReportOptions& options) {
    const PromptSet& prompts = prompts_or_builtin(options.prompts);
    std::vector<PhaseReport> phases(segmentation.segments.size());
    detail::parallel_for(phases.size(), options.max_parallel, [&](std::size_t k) {
        const Segment& seg = segmentation.segments[k];
        auto in_range = events_in_segment(events, seg);
        phases[k] = generate_phase_report(backend, seg, in_range, include_stats, options.prompt, prompts);
    });
    return compose_global_report(backend, user_id, mode, std::move(phases), prompts);
}

GlobalReport generate_baseline_report(GenerationBackend& backend, const std::string& user_id,
                                      std::span<const EnrichedEvent> events, const ReportOptions& options) {
    if (events.empty()) throw ContractError("generate_baseline_report: empty timeline");
    const PromptSet& prompts = prompts_or_builtin(options.prompts);
    PhasePrompt prompt = build_baseline_prompt(events, options.prompt, prompts);
    BaselineRequest payload{prompt.event_count, prompt.excerpts};

    GlobalReport report;
    report.user_id = user_id;
    report.mode = ReportMode::base;
    report.overall = complete_checked(backend, {std::move(prompt.text), std::move(payload)}, "baseline report");
    report.prompt_version = prompts.version();
    return report;
}

std::string render_report_text(const GlobalReport& report) {
    if (report.phases.empty()) return report.overall;
    std::string out;
    for (const auto& p : report.phases) {
        out += p.text;
        out += "\n\n";
    }
    out += "Overall summary:\n";
    out += report.overall;
    return out;
}

}  // namespace phasetrace
