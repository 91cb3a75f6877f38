#include "phasetrace/serialization.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

const Json& field(const Json& j, const char* name) {
    if (!j.is_object()) throw ParseError("expected a JSON object");
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field \"") + name + "\"");
    return *it;
}

template <typename T>
T get(const Json& j, const char* name) {
    try {
        return field(j, name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field \"") + name + "\" has the wrong type");
    }
}

Timestamp timestamp_field(const Json& j, const char* name) {
    auto ts = parse_timestamp(get<std::string>(j, name));
    if (!ts) throw ParseError(std::string("field \"") + name + "\" is not an ISO-8601 timestamp");
    return *ts;
}

Date date_field(const Json& j, const char* name) {
    auto d = parse_date(get<std::string>(j, name));
    if (!d) throw ParseError(std::string("field \"") + name + "\" is not a YYYY-MM-DD date");
    return *d;
}

template <typename T>
void read_opt(const Json& j, const char* name, T& out) {
    auto it = j.find(name);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("config field \"") + name + "\" has the wrong type");
    }
}

}  // namespace

Json to_json(const Event& e) {
    return Json{{"user_id", e.user_id}, {"timestamp", format_timestamp(e.timestamp)}, {"source", e.source},
                {"text", e.text}};
}

Event event_from_json(const Json& j) {
    return {get<std::string>(j, "user_id"), timestamp_field(j, "timestamp"), get<std::string>(j, "source"),
            get<std::string>(j, "text")};
}

Json to_json(const Rejection& r) { return Json{{"line", r.line}, {"reason", r.reason}}; }

Json to_json(const ClassDistribution& d) {
    Json probs = Json::object();
    for (const auto& [name, p] : d.probs) probs[name] = p;
    return Json{{"dimension", d.dimension}, {"probs", probs}};
}

ClassDistribution distribution_from_json(const Json& j) {
    ClassDistribution d{get<std::string>(j, "dimension"), {}};
    const Json& probs = field(j, "probs");
    if (!probs.is_object()) throw ParseError("field \"probs\" must be an object");
    for (const auto& [name, p] : probs.items()) {
        if (!p.is_number()) throw ParseError("probability for \"" + name + "\" is not a number");
        d.probs[name] = p.get<double>();
    }
    return d;
}

Json to_json(const EnrichedEvent& e) {
    Json j = to_json(e.event);
    Json dists = Json::array();
    for (const auto& d : e.distributions) dists.push_back(to_json(d));
    j["distributions"] = dists;
    j["score"] = e.score;
    if (e.topics) j["topics"] = *e.topics;
    return j;
}

EnrichedEvent enriched_from_json(const Json& j) {
    EnrichedEvent e;
    e.event = event_from_json(j);
    const Json& dists = field(j, "distributions");
    if (!dists.is_array()) throw ParseError("field \"distributions\" must be an array");
    for (const auto& d : dists) e.distributions.push_back(distribution_from_json(d));
    e.score = get<double>(j, "score");
    if (j.contains("topics")) e.topics = get<std::vector<std::string>>(j, "topics");
    return e;
}

Json to_json(const DailyPoint& p) {
    return Json{{"date", format_date(p.date)}, {"x", p.x}, {"raw", p.raw}, {"smoothed", p.smoothed},
                {"event_count", p.event_count}};
}

DailyPoint point_from_json(const Json& j) {
    return {date_field(j, "date"), get<int>(j, "x"), get<double>(j, "raw"), get<double>(j, "smoothed"),
            get<int>(j, "event_count")};
}

Json to_json(const Segment& s) {
    return Json{{"a", s.first + 1},
                {"b", s.last + 1},
                {"start_date", format_date(s.start_date)},
                {"end_date", format_date(s.end_date)},
                {"mean_severity", s.mean_severity},
                {"slope", s.slope},
                {"trend", std::string(to_string(s.trend))},
                {"position", std::to_string(s.position) + " of " + std::to_string(s.total)}};
}

Segment segment_from_json(const Json& j, std::size_t total) {
    Segment s;
    const auto a = get<std::size_t>(j, "a");
    const auto b = get<std::size_t>(j, "b");
    if (a < 1 || b < 1) throw ParseError("segment indices are 1-based");
    s.first = a - 1;
    s.last = b - 1;
    s.start_date = date_field(j, "start_date");
    s.end_date = date_field(j, "end_date");
    s.mean_severity = get<double>(j, "mean_severity");
    s.slope = get<double>(j, "slope");
    s.trend = parse_trend(get<std::string>(j, "trend"));
    const auto position = get<std::string>(j, "position");
    unsigned long k = 0, n = 0;
    if (std::sscanf(position.c_str(), "%lu of %lu", &k, &n) != 2) {
        throw ParseError("segment position must read \"k of n\"");
    }
    s.position = k;
    s.total = n;
    if (n != total) throw ParseError("segment position total disagrees with segment count");
    return s;
}

Json to_json(const Segmentation& s) {
    Json segs = Json::array();
    for (const auto& seg : s.segments) segs.push_back(to_json(seg));
    Json cps = Json::array();
    for (const auto& d : s.change_points) cps.push_back(format_date(d));
    return Json{{"method", std::string(to_string(s.method))}, {"k_max", s.k_max}, {"segments", segs},
                {"change_points", cps}};
}

Segmentation segmentation_from_json(const Json& j) {
    Segmentation s;
    s.method = parse_segmentation_method(get<std::string>(j, "method"));
    s.k_max = get<std::size_t>(j, "k_max");
    const Json& segs = field(j, "segments");
    if (!segs.is_array()) throw ParseError("field \"segments\" must be an array");
    for (const auto& seg : segs) s.segments.push_back(segment_from_json(seg, segs.size()));
    for (const auto& d : field(j, "change_points")) {
        auto date = d.is_string() ? parse_date(d.get<std::string>()) : std::nullopt;
        if (!date) throw ParseError("change point is not a YYYY-MM-DD date");
        s.change_points.push_back(*date);
    }
    return s;
}

Json to_json(const SegmentRef& r) {
    return Json{{"a", r.first + 1},
                {"b", r.last + 1},
                {"start_date", format_date(r.start_date)},
                {"end_date", format_date(r.end_date)},
                {"position", r.position},
                {"total", r.total}};
}

SegmentRef segment_ref_from_json(const Json& j) {
    SegmentRef r;
    const auto a = get<std::size_t>(j, "a");
    const auto b = get<std::size_t>(j, "b");
    if (a < 1 || b < 1) throw ParseError("segment indices are 1-based");
    r.first = a - 1;
    r.last = b - 1;
    r.start_date = date_field(j, "start_date");
    r.end_date = date_field(j, "end_date");
    r.position = get<std::size_t>(j, "position");
    r.total = get<std::size_t>(j, "total");
    return r;
}

Json to_json(const GlobalReport& r) {
    Json phases = Json::array();
    for (const auto& p : r.phases) {
        Json evidence = Json::array();
        for (const auto& k : p.evidence) evidence.push_back(k.str());
        phases.push_back(Json{{"segment_ref", to_json(p.segment)}, {"text", p.text}, {"evidence", evidence}});
    }
    return Json{{"user_id", r.user_id},
                {"mode", std::string(to_string(r.mode))},
                {"phases", phases},
                {"overall", r.overall},
                {"prompt_version", r.prompt_version}};
}

GlobalReport report_from_json(const Json& j) {
    GlobalReport r;
    r.user_id = get<std::string>(j, "user_id");
    r.mode = parse_report_mode(get<std::string>(j, "mode"));
    r.overall = get<std::string>(j, "overall");
    r.prompt_version = get<std::string>(j, "prompt_version");
    for (const auto& p : field(j, "phases")) {
        PhaseReport phase;
        phase.segment = segment_ref_from_json(field(p, "segment_ref"));
        phase.text = get<std::string>(p, "text");
        if (p.contains("evidence")) {
            for (const auto& k : p["evidence"]) {
                auto s = k.get<std::string>();
                auto at = s.rfind('@');
                auto ts = at == std::string::npos ? std::nullopt : parse_timestamp(s.substr(at + 1));
                if (!ts) throw ParseError("evidence key \"" + s + "\" is malformed");
                phase.evidence.push_back({s.substr(0, at), *ts});
            }
        }
        r.phases.push_back(std::move(phase));
    }
    return r;
}

Note note_from_json(const Json& j) {
    Note n;
    n.key = get<std::string>(j, "key");
    n.text = get<std::string>(j, "text");
    if (j.contains("date") && !j["date"].is_null()) n.date = date_field(j, "date");
    return n;
}

Json to_json(const Note& n, const std::string& user_id) {
    Json j{{"user_id", user_id}, {"key", n.key}};
    if (n.date) j["date"] = format_date(*n.date);
    j["text"] = n.text;
    return j;
}

Json to_json(const PipelineConfig& cfg) {
    Json weights = Json::object();
    for (const auto& [name, w] : cfg.weights.weights()) weights[name] = w;
    return Json{
        {"config_version", cfg.config_version},
        {"prep",
         {{"min_text_length", cfg.prep.min_text_length},
          {"dedup", cfg.prep.dedup},
          {"lowercase", cfg.prep.lowercase},
          {"drop_unparseable_timestamps", cfg.prep.drop_unparseable_timestamps},
          {"infer_timestamps", cfg.prep.infer_timestamps}}},
        {"weights", weights},
        {"smoothing_window", cfg.smoothing_window},
        {"k", cfg.k},
        {"trend_threshold", cfg.trend_threshold},
        {"classifier",
         {{"kind", cfg.classifier.kind},
          {"annotations", cfg.classifier.annotations},
          {"url", cfg.classifier.url},
          {"token_env", cfg.classifier.token_env},
          {"dimensions", cfg.classifier.dimensions},
          {"batch_size", cfg.classifier.batch_size},
          {"max_in_flight", cfg.classifier.max_in_flight},
          {"timeout_seconds", cfg.classifier.timeout_seconds},
          {"max_retries", cfg.classifier.max_retries}}},
        {"generator",
         {{"kind", cfg.generator.kind},
          {"url", cfg.generator.url},
          {"model", cfg.generator.model},
          {"api_key_env", cfg.generator.api_key_env},
          {"temperature", cfg.generator.temperature},
          {"timeout_seconds", cfg.generator.timeout_seconds},
          {"max_retries", cfg.generator.max_retries},
          {"max_parallel", cfg.generator.max_parallel},
          {"max_events_per_prompt", cfg.generator.max_events_per_prompt},
          {"excerpt_chars", cfg.generator.excerpt_chars},
          {"prompt_dir", cfg.generator.prompt_dir}}},
        {"variant", std::string(to_string(cfg.variant))},
        {"user_parallelism", cfg.user_parallelism}};
}

PipelineConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    PipelineConfig cfg;
    read_opt(j, "config_version", cfg.config_version);
    if (j.contains("prep")) {
        const Json& p = j["prep"];
        read_opt(p, "min_text_length", cfg.prep.min_text_length);
        read_opt(p, "dedup", cfg.prep.dedup);
        read_opt(p, "lowercase", cfg.prep.lowercase);
        read_opt(p, "drop_unparseable_timestamps", cfg.prep.drop_unparseable_timestamps);
        read_opt(p, "infer_timestamps", cfg.prep.infer_timestamps);
    }
    if (j.contains("weights")) {
        std::map<std::string, double> w;
        read_opt(j, "weights", w);
        cfg.weights = SeverityWeights(std::move(w));
    }
    read_opt(j, "smoothing_window", cfg.smoothing_window);
    read_opt(j, "k", cfg.k);
    read_opt(j, "trend_threshold", cfg.trend_threshold);
    if (j.contains("classifier")) {
        const Json& c = j["classifier"];
        read_opt(c, "kind", cfg.classifier.kind);
        read_opt(c, "annotations", cfg.classifier.annotations);
        read_opt(c, "url", cfg.classifier.url);
        read_opt(c, "token_env", cfg.classifier.token_env);
        read_opt(c, "dimensions", cfg.classifier.dimensions);
        read_opt(c, "batch_size", cfg.classifier.batch_size);
        read_opt(c, "max_in_flight", cfg.classifier.max_in_flight);
        read_opt(c, "timeout_seconds", cfg.classifier.timeout_seconds);
        read_opt(c, "max_retries", cfg.classifier.max_retries);
    }
    if (j.contains("generator")) {
        const Json& g = j["generator"];
        read_opt(g, "kind", cfg.generator.kind);
        read_opt(g, "url", cfg.generator.url);
        read_opt(g, "model", cfg.generator.model);
        read_opt(g, "api_key_env", cfg.generator.api_key_env);
        read_opt(g, "temperature", cfg.generator.temperature);
        read_opt(g, "timeout_seconds", cfg.generator.timeout_seconds);
        read_opt(g, "max_retries", cfg.generator.max_retries);
        read_opt(g, "max_parallel", cfg.generator.max_parallel);
        read_opt(g, "max_events_per_prompt", cfg.generator.max_events_per_prompt);
        read_opt(g, "excerpt_chars", cfg.generator.excerpt_chars);
        read_opt(g, "prompt_dir", cfg.generator.prompt_dir);
    }
    if (j.contains("variant")) cfg.variant = parse_variant(get<std::string>(j, "variant"));
    read_opt(j, "user_parallelism", cfg.user_parallelism);
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("config " + path.string() + " is not valid JSON");
    auto cfg = config_from_json(j);
    // Relative paths in a config file are resolved against its directory.
    auto base = path.parent_path();
    if (!cfg.classifier.annotations.empty() && std::filesystem::path(cfg.classifier.annotations).is_relative()) {
        cfg.classifier.annotations = (base / cfg.classifier.annotations).lexically_normal().string();
    }
    if (!cfg.generator.prompt_dir.empty() && std::filesystem::path(cfg.generator.prompt_dir).is_relative()) {
        cfg.generator.prompt_dir = (base / cfg.generator.prompt_dir).lexically_normal().string();
    }
    return cfg;
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string canonical = to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace phasetrace
