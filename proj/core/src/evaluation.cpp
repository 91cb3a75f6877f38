#include "phasetrace/evaluation.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "parallel.hpp"

namespace phasetrace {
namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

bool parse_yes_no(std::string_view reply) {
    std::size_t i = 0;
    auto skip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
    while (i < reply.size() && skip(static_cast<unsigned char>(reply[i]))) ++i;
    std::size_t j = i;
    while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]))) ++j;
    const std::string word = lower_ascii(reply.substr(i, j - i));
    if (word == "yes") return true;
    if (word == "no") return false;
    throw ParseError("coverage reply is neither yes nor no: \"" + std::string(reply.substr(0, 80)) + "\"");
}

CoverageResult assess_topic_coverage(std::string_view report_text, std::span<const std::string> topics,
                                     GenerationBackend& judge, const PromptSet& prompts) {
    if (topics.empty()) throw UndefinedMetricError("topic coverage is undefined for an empty topic list");
    CoverageResult out;
    out.total = topics.size();
    out.per_topic.reserve(topics.size());
    for (const auto& topic : topics) {
        CoverageRequest req{topic, std::string(report_text)};
        std::string prompt = prompts.render("coverage", {{"topic", topic}, {"report", req.report}});
        const bool covered = parse_yes_no(judge.complete({std::move(prompt), std::move(req)}));
        out.per_topic.push_back(covered);
        if (covered) ++out.covered;
    }
    return out;
}

double topic_coverage(std::string_view report_text, std::span<const std::string> topics, GenerationBackend& judge,
                      const PromptSet& prompts) {
    return assess_topic_coverage(report_text, topics, judge, prompts).fraction();
}

UserTopics parse_user_topics(std::istream& in) {
    UserTopics out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError("not a JSON object", n);
        if (!j.contains("user_id") || !j["user_id"].is_string()) throw ParseError("missing user_id", n);
        if (!j.contains("topics") || !j["topics"].is_array()) throw ParseError("missing topics array", n);
        auto& topics = out[j["user_id"].get<std::string>()];
        for (const auto& t : j["topics"]) {
            if (!t.is_string()) throw ParseError("topic labels must be strings", n);
            topics.push_back(t.get<std::string>());
        }
    }
    return out;
}

UserTopics load_user_topics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_user_topics(in);
}

std::string_view to_string(PresentationOrder order) { return order == PresentationOrder::AB ? "AB" : "BA"; }

PresentationOrder presentation_order(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return (rng() & 1U) == 0 ? PresentationOrder::AB : PresentationOrder::BA;
}

std::uint64_t comparison_seed(std::uint64_t base, std::string_view user_id, std::string_view judge_id) {
    std::uint64_t h = 1469598103934665603ULL ^ base;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    mix(user_id);
    mix(judge_id);
    return h;
}

std::string render_judge_prompt(std::string_view report_1, std::string_view report_2, const PromptSet& prompts) {
    return prompts.render("judge", {{"report_1", std::string(report_1)}, {"report_2", std::string(report_2)}});
}

JudgeVerdict judge_compare(std::string_view report_a, std::string_view report_b, GenerationBackend& judge,
                           std::uint64_t seed, std::string judge_id, const PromptSet& prompts) {
    JudgeVerdict v;
    v.judge_id = judge_id.empty() ? judge.name() : std::move(judge_id);
    v.order = presentation_order(seed);
    const bool ab = v.order == PresentationOrder::AB;
    JudgeRequest req{std::string(ab ? report_a : report_b), std::string(ab ? report_b : report_a)};
    const std::string prompt = render_judge_prompt(req.report_1, req.report_2, prompts);

    v.raw_response = judge.complete({prompt, req});
    ParsedJudgeResponse parsed;
    try {
        parsed = parse_judge_response(v.raw_response);
    } catch (const ParseError& first) {
        std::string retry = prompts.render("judge_retry", {{"prompt", prompt}, {"reason", first.what()}});
        v.raw_response = judge.complete({std::move(retry), req});
        try {
            parsed = parse_judge_response(v.raw_response);
        } catch (const ParseError& second) {
            throw JudgeParseError(std::string("judge reply unparseable after reprompt: ") + second.what(),
                                  v.raw_response);
        }
    }
    v.report_a = ab ? parsed.report_1 : parsed.report_2;
    v.report_b = ab ? parsed.report_2 : parsed.report_1;
    return v;
}

std::vector<JudgedPair> judge_all(std::span<const ReportPair> pairs, std::span<const NamedJudge> judges,
                                  std::uint64_t seed, std::size_t max_parallel, const PromptSet& prompts) {
    std::vector<JudgedPair> out(pairs.size() * judges.size());
    detail::parallel_for(out.size(), max_parallel, [&](std::size_t i) {
        const ReportPair& pair = pairs[i / judges.size()];
        const NamedJudge& judge = judges[i % judges.size()];
        if (!judge.backend) throw ContractError("judge " + judge.judge_id + " has no backend");
        out[i] = {pair.user_id, judge_compare(pair.report_a, pair.report_b, *judge.backend,
                                              comparison_seed(seed, pair.user_id, judge.judge_id), judge.judge_id,
                                              prompts)};
    });
    return out;
}

VerdictTable aggregate_verdicts(std::span<const JudgeVerdict> verdicts) {
    if (verdicts.empty()) throw ContractError("cannot aggregate an empty verdict list");
    VerdictTable t;
    t.count = verdicts.size();
    for (const auto& v : verdicts) {
        for (std::size_t c = 0; c < kCriteria.size(); ++c) {
            t.mean_a[c] += v.report_a[c];
            t.mean_b[c] += v.report_b[c];
        }
    }
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
        t.mean_a[c] /= static_cast<double>(t.count);
        t.mean_b[c] /= static_cast<double>(t.count);
    }
    return t;
}

double round_display(double value) { return std::round(value * 10.0) / 10.0; }

Json to_json(const JudgeVerdict& v) {
    Json a = Json::object(), b = Json::object();
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
        a[std::string(criterion_key(kCriteria[c]))] = v.report_a[c];
        b[std::string(criterion_key(kCriteria[c]))] = v.report_b[c];
    }
    return Json{{"judge_id", v.judge_id},
                {"presentation_order", std::string(to_string(v.order))},
                {"report_a", a},
                {"report_b", b},
                {"raw_response", v.raw_response}};
}

JudgeVerdict verdict_from_json(const Json& j) {
    try {
        JudgeVerdict v;
        v.judge_id = j.at("judge_id").get<std::string>();
        const auto order = j.at("presentation_order").get<std::string>();
        if (order != "AB" && order != "BA") throw ParseError("presentation_order must be AB or BA");
        v.order = order == "AB" ? PresentationOrder::AB : PresentationOrder::BA;
        for (std::size_t c = 0; c < kCriteria.size(); ++c) {
            const std::string key(criterion_key(kCriteria[c]));
            v.report_a[c] = j.at("report_a").at(key).get<int>();
            v.report_b[c] = j.at("report_b").at(key).get<int>();
            if (v.report_a[c] < 1 || v.report_a[c] > 5 || v.report_b[c] < 1 || v.report_b[c] > 5) {
                throw ParseError("score for " + key + " outside 1..5");
            }
        }
        v.raw_response = j.value("raw_response", "");
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed verdict: ") + e.what());
    }
}

std::string criterion_table_csv(std::span<const JudgeColumn> columns) {
    std::string out = "criterion";
    for (const auto& col : columns) out += "," + csv_field(col.judge_id + " Base") + "," + csv_field(col.judge_id + " Traj");
    out += "\n";
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
        out += csv_field(criterion_row_label(kCriteria[c]));
        for (const auto& col : columns) {
            out += fmt::format(",{:.1f},{:.1f}", round_display(col.table.mean_b[c]), round_display(col.table.mean_a[c]));
        }
        out += "\n";
    }
    return out;
}

Json criterion_table_json(std::span<const JudgeColumn> columns) {
    Json rows = Json::array();
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
        Json judges = Json::object();
        for (const auto& col : columns) {
            judges[col.judge_id] = Json{{"base", round_display(col.table.mean_b[c])},
                                        {"traj", round_display(col.table.mean_a[c])}};
        }
        rows.push_back(Json{{"criterion", std::string(criterion_key(kCriteria[c]))},
                            {"label", std::string(criterion_row_label(kCriteria[c]))},
                            {"judges", judges}});
    }
    Json counts = Json::object();
    for (const auto& col : columns) counts[col.judge_id] = col.table.count;
    return Json{{"rows", rows}, {"verdicts", counts}};
}

std::vector<VariantRow> variant_rows(
    const std::vector<std::pair<AblationVariant, std::vector<JudgeVerdict>>>& runs) {
    std::vector<VariantRow> rows;
    std::vector<JudgeVerdict> pooled;
    for (const auto& [variant, verdicts] : runs) {
        if (verdicts.empty()) {
            throw ContractError("no verdicts for variant " + std::string(to_string(variant)));
        }
        rows.push_back({std::string(to_string(variant)), aggregate_verdicts(verdicts).mean_a});
        pooled.insert(pooled.end(), verdicts.begin(), verdicts.end());
    }
    if (!pooled.empty()) rows.push_back({"base", aggregate_verdicts(pooled).mean_b});
    return rows;
}

std::string variant_table_csv(std::span<const VariantRow> rows) {
    std::string out = "variant";
    for (auto c : kCriteria) out += "," + std::string(criterion_key(c));
    out += "\n";
    for (const auto& row : rows) {
        out += csv_field(row.variant);
        for (double m : row.means) out += fmt::format(",{:.1f}", round_display(m));
        out += "\n";
    }
    return out;
}

Json variant_table_json(std::span<const VariantRow> rows) {
    Json out = Json::array();
    for (const auto& row : rows) {
        Json scores = Json::object();
        for (std::size_t c = 0; c < kCriteria.size(); ++c) {
            scores[std::string(criterion_key(kCriteria[c]))] = round_display(row.means[c]);
        }
        out.push_back(Json{{"variant", row.variant}, {"scores", scores}});
    }
    return out;
}

GlobalReport run_variant(AblationVariant variant, const Timeline& timeline, ClassifierBackend& classifier,
                         GenerationBackend& generator, const PipelineConfig& cfg, const TopicAssignments* topics) {
    try {
        return analyze_user(timeline, classifier, generator, cfg, variant, topics).report;
    } catch (const VariantError&) {
        throw;
    } catch (const Error& e) {
        throw VariantError(variant, e.what());
    }
}

}  // namespace phasetrace
