#include "phasetrace/likert.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view strip(std::string_view s) {
    auto junk = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '#' || c == '*' || c == '-' || c == '_' ||
               c == '>' || c == '`';
    };
    while (!s.empty() && junk(s.front())) s.remove_prefix(1);
    while (!s.empty() && (junk(s.back()) || s.back() == ':')) s.remove_suffix(1);
    return s;
}

std::optional<int> report_header(std::string_view line) {
    std::string l = lower(strip(line));
    if (l == "report 1") return 1;
    if (l == "report 2") return 2;
    return std::nullopt;
}

}  // namespace

std::string_view criterion_key(Criterion c) {
    switch (c) {
        case Criterion::trajectory_coverage: return "trajectory_coverage";
        case Criterion::temporal_coherence: return "temporal_coherence";
        case Criterion::change_point_sensitivity: return "change_point_sensitivity";
        case Criterion::segment_specificity: return "segment_specificity";
        case Criterion::overall_preference: return "overall_preference";
    }
    return "";
}

std::string_view criterion_label(Criterion c) {
    switch (c) {
        case Criterion::trajectory_coverage: return "Trajectory Coverage";
        case Criterion::temporal_coherence: return "Temporal Coherence";
        case Criterion::change_point_sensitivity: return "Sensitivity to Change Points";
        case Criterion::segment_specificity: return "Segment-Level Specificity";
        case Criterion::overall_preference: return "Overall Preference";
    }
    return "";
}

std::string_view criterion_row_label(Criterion c) {
    switch (c) {
        case Criterion::trajectory_coverage: return "Trajectory coverage";
        case Criterion::temporal_coherence: return "Temporal coherence";
        case Criterion::change_point_sensitivity: return "Sensitivity to change points";
        case Criterion::segment_specificity: return "Segment-level specificity";
        case Criterion::overall_preference: return "Overall preference";
    }
    return "";
}

std::string format_judge_response(const LikertScores& report_1, const LikertScores& report_2) {
    std::string out;
    for (int r = 1; r <= 2; ++r) {
        const auto& scores = r == 1 ? report_1 : report_2;
        out += "Report " + std::to_string(r) + "\n";
        for (std::size_t i = 0; i < kCriteria.size(); ++i) {
            out += std::string(criterion_label(kCriteria[i])) + ": " + std::to_string(scores[i]) + "/5\n";
        }
    }
    return out;
}

ParsedJudgeResponse parse_judge_response(std::string_view text) {
    std::array<std::array<std::optional<int>, 5>, 2> found{};
    int current = 0;
    std::size_t lineno = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++lineno;

        if (auto r = report_header(line)) {
            current = *r;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        std::string name = lower(strip(line.substr(0, colon)));
        auto it = std::find_if(kCriteria.begin(), kCriteria.end(),
                               [&](Criterion c) { return lower(criterion_label(c)) == name; });
        if (it == kCriteria.end()) continue;
        if (current == 0) throw ParseError("criterion before any \"Report 1\"/\"Report 2\" header", lineno);

        std::string_view value = strip(line.substr(colon + 1));
        std::size_t digits = 0;
        while (digits < value.size() && std::isdigit(static_cast<unsigned char>(value[digits]))) ++digits;
        if (digits == 0) throw ParseError("no score for " + std::string(criterion_label(*it)), lineno);
        std::string_view rest = strip(value.substr(digits));
        if (!rest.empty() && rest != "/5" && rest != "/ 5") {
            throw ParseError("unexpected text after score for " + std::string(criterion_label(*it)), lineno);
        }
        int score = std::stoi(std::string(value.substr(0, digits)));
        if (score < 1 || score > 5) {
            throw ParseError("score " + std::to_string(score) + " outside 1..5", lineno);
        }
        auto& slot = found[current - 1][static_cast<std::size_t>(it - kCriteria.begin())];
        if (slot) throw ParseError("duplicate score for " + std::string(criterion_label(*it)), lineno);
        slot = score;
    }

    ParsedJudgeResponse out;
    for (int r = 0; r < 2; ++r) {
        for (std::size_t i = 0; i < kCriteria.size(); ++i) {
            if (!found[r][i]) {
                throw ParseError("Report " + std::to_string(r + 1) + " lacks a score for " +
                                 std::string(criterion_label(kCriteria[i])));
            }
            (r == 0 ? out.report_1 : out.report_2)[i] = *found[r][i];
        }
    }
    return out;
}

}  // namespace phasetrace
