#include "phasetrace/generation.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "phasetrace/error.hpp"
#include "phasetrace/likert.hpp"
#include "prompts.inc"

namespace phasetrace {
namespace {

std::string strip_final_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string excerpt_list(const std::vector<EventExcerpt>& excerpts, std::size_t limit, std::size_t chars) {
    // first, middle and last of the supplied excerpts
    std::vector<std::size_t> picks;
    if (!excerpts.empty()) {
        picks = {0, excerpts.size() / 2, excerpts.size() - 1};
        picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
        if (picks.size() > limit) picks.resize(limit);
    }
    std::string out;
    for (std::size_t i : picks) {
        if (!out.empty()) out += "; ";
        out += fmt::format("[{}] \"{}\"", format_date(to_date(excerpts[i].key.timestamp)),
                           truncate_utf8(excerpts[i].text, chars));
    }
    return out;
}

std::string phase_text(const PhaseRequest& req) {
    const SegmentRef ref = ref_of(req.segment);
    if (req.event_count == 0) {
        return phase_header(ref) + ": no activity recorded in this interval.";
    }
    std::string out = phase_header(ref) + ": ";
    if (req.include_stats) {
        out += fmt::format("mean severity {:.3f}, trend {}; ", req.segment.mean_severity,
                           to_string(req.segment.trend));
    }
    out += fmt::format("{} {}; representative excerpts: {}.", req.event_count,
                       req.event_count == 1 ? "event" : "events", excerpt_list(req.excerpts, 3, 120));
    return out;
}

std::string compose_text(const ComposeRequest& req) {
    static const std::regex trend_re{R"(trend (worsening|improving|stable))"};
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (const auto& text : req.phase_texts) {
        std::smatch m;
        if (std::regex_search(text, m, trend_re)) {
            if (counts[m[1]]++ == 0) order.push_back(m[1]);
        }
    }
    const std::size_t n = req.phase_texts.size();
    std::string span;
    if (!req.segments.empty()) {
        span = fmt::format(" from {} to {}", format_date(req.segments.front().start_date),
                           format_date(req.segments.back().end_date));
    }
    std::string out = fmt::format("Across {} {}{}", n, n == 1 ? "phase" : "phases", span);
    if (order.empty()) return out + ", no phase-level trend information was available.";
    std::string dominant = order.front();
    for (const auto& t : order) {
        if (counts[t] > counts[dominant]) dominant = t;
    }
    return out + fmt::format(", the dominant trend is {} ({} of {} phases).", dominant, counts[dominant], n);
}

std::string baseline_text(const BaselineRequest& req) {
    if (req.excerpts.empty()) return "No posts were available to summarize.";
    return fmt::format("Summary of {} {} written between {} and {}; representative excerpts: {}.",
                       req.event_count, req.event_count == 1 ? "post" : "posts",
                       format_date(to_date(req.excerpts.front().key.timestamp)),
                       format_date(to_date(req.excerpts.back().key.timestamp)),
                       excerpt_list(req.excerpts, 3, 120));
}

std::string answer_text(const AnswerRequest& req) {
    if (req.evidence.empty()) return "No evidence was found for this question.";
    std::string out = fmt::format("Evidence relevant to \"{}\":", req.question);
    for (const auto& c : req.evidence) {
        out += fmt::format("\n- [{}]{} {}", c.key, c.date.empty() ? "" : " (" + c.date + ")",
                           truncate_utf8(c.excerpt, 160));
    }
    return out;
}

/// Surface-feature scoring for offline judging.
LikertScores feature_scores(const std::string& report) {
    static const std::regex header_re{R"(Phase \d+ \(from \d{4}-\d{2}-\d{2} to \d{4}-\d{2}-\d{2}\))"};
    static const std::regex date_re{R"(\d{4}-\d{2}-\d{2})"};
    static const std::regex trend_re{R"(trend (worsening|improving|stable))"};
    static const std::regex excerpt_re{R"(\[\d{4}-\d{2}-\d{2}\] ")"};
    auto count = [&](const std::regex& re) {
        return static_cast<int>(std::distance(std::sregex_iterator(report.begin(), report.end(), re),
                                              std::sregex_iterator()));
    };
    std::set<std::string> dates;
    for (auto it = std::sregex_iterator(report.begin(), report.end(), date_re); it != std::sregex_iterator(); ++it) {
        dates.insert(it->str());
    }
    const int phases = count(header_re);
    const int trends = count(trend_re);
    const int excerpts = count(excerpt_re);
    auto clamp5 = [](int v) { return std::clamp(v, 1, 5); };
    LikertScores s{};
    s[0] = clamp5(1 + phases);
    s[1] = clamp5(1 + static_cast<int>(dates.size()) / 3);
    s[2] = clamp5(1 + std::max(phases - 1, 0) + (trends > 1 ? 1 : 0));
    s[3] = clamp5(1 + excerpts / 3);
    s[4] = clamp5((s[0] + s[1] + s[2] + s[3] + 2) / 4);
    return s;
}

std::string judge_text(const JudgeRequest& req) {
    return format_judge_response(feature_scores(req.report_1), feature_scores(req.report_2));
}

std::string coverage_text(const CoverageRequest& req) {
    return lower(req.report).find(lower(req.topic)) != std::string::npos ? "yes" : "no";
}

}  // namespace

PromptSet::PromptSet(std::string version, std::map<std::string, std::string, std::less<>> templates)
    : version_(std::move(version)), templates_(std::move(templates)) {
    for (auto& [name, text] : templates_) text = strip_final_newline(std::move(text));
}

const PromptSet& PromptSet::builtin() {
    static const PromptSet set = [] {
        std::map<std::string, std::string, std::less<>> templates;
        for (const auto& p : detail::kBuiltinPrompts) templates.emplace(p.name, p.text);
        return PromptSet(PHASETRACE_PROMPT_VERSION, std::move(templates));
    }();
    return set;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
    std::map<std::string, std::string, std::less<>> templates;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) throw IoError("cannot read prompt template " + entry.path().string());
        std::ostringstream buf;
        buf << in.rdbuf();
        templates.emplace(entry.path().stem().string(), buf.str());
    }
    if (ec) throw IoError("cannot list prompt directory " + dir.string() + ": " + ec.message());
    for (const auto& [name, text] : builtin().templates_) {
        if (!templates.contains(name)) {
            throw ConfigError("prompt directory " + dir.string() + " lacks template \"" + name + "\"");
        }
    }
    return PromptSet(std::filesystem::absolute(dir).lexically_normal().filename().string(), std::move(templates));
}

const std::string& PromptSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("unknown prompt template \"" + std::string(name) + "\"");
    return it->second;
}

std::string PromptSet::render(std::string_view name, const std::map<std::string, std::string>& values) const {
    const std::string& tmpl = get(name);
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos);
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(tmpl, pos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        std::string key = tmpl.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) {
            throw ConfigError("template \"" + std::string(name) + "\" needs a value for {{" + key + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

SegmentRef ref_of(const Segment& s) {
    return {s.first, s.last, s.start_date, s.end_date, s.position, s.total};
}

std::string phase_header(const SegmentRef& ref) {
    return fmt::format("Phase {} (from {} to {})", ref.position, format_date(ref.start_date),
                       format_date(ref.end_date));
}

std::string truncate_utf8(std::string_view text, std::size_t max_chars) {
    std::size_t chars = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
        if (chars == max_chars) return std::string(text.substr(0, i)) + "...";
        ++chars;
    }
    return std::string(text);
}

std::string TemplateBackend::complete(const GenerationRequest& request) {
    return std::visit(
        [](const auto& req) -> std::string {
            using T = std::decay_t<decltype(req)>;
            if constexpr (std::is_same_v<T, PhaseRequest>) return phase_text(req);
            else if constexpr (std::is_same_v<T, ComposeRequest>) return compose_text(req);
            else if constexpr (std::is_same_v<T, BaselineRequest>) return baseline_text(req);
            else if constexpr (std::is_same_v<T, AnswerRequest>) return answer_text(req);
            else if constexpr (std::is_same_v<T, JudgeRequest>) return judge_text(req);
            else return coverage_text(req);
        },
        request.payload);
}

}  // namespace phasetrace
