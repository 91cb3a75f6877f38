#include "phasetrace/store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "parallel.hpp"
#include "phasetrace/error.hpp"

namespace phasetrace {
namespace fs = std::filesystem;

namespace {

Json header_line(std::string_view artifact, const std::string& config_hash, Json extra = Json::object()) {
    Json h{{"format_version", kArtifactFormatVersion}, {"artifact", std::string(artifact)},
           {"config_hash", config_hash}};
    for (auto& [k, v] : extra.items()) h[k] = v;
    return Json{{"header", h}};
}

std::string jsonl(const Json& header, const std::vector<Json>& rows) {
    std::string out = header.dump() + "\n";
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Rows of a JSONL artifact after checking its header.
std::vector<Json> read_jsonl(const fs::path& path, std::string_view artifact, Json* header_out = nullptr) {
    if (!fs::exists(path)) throw NotFoundError("missing artifact " + path.string());
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<Json> rows;
    std::size_t n = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ValidationError(path.string() + ":" + std::to_string(n) + ": invalid JSON");
        if (!have_header) {
            const bool ok = j.is_object() && j.contains("header") && j["header"].is_object() &&
                            j["header"].value("artifact", "") == artifact &&
                            j["header"].value("format_version", 0) == kArtifactFormatVersion;
            if (!ok) throw ValidationError(path.string() + ": missing or foreign artifact header");
            if (header_out) *header_out = j["header"];
            have_header = true;
            continue;
        }
        rows.push_back(std::move(j));
    }
    if (!have_header) throw ValidationError(path.string() + ": empty artifact");
    return rows;
}

template <typename Fn>
auto corrupt_guard(const fs::path& path, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ParseError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

fs::path segmentation_path(const fs::path& dir, AblationVariant v) {
    return dir / "segmentation" / (std::string(to_string(v)) + ".jsonl");
}

fs::path report_path(const fs::path& dir, AblationVariant v) {
    return dir / "reports" / (std::string(to_string(v)) + ".json");
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
    static std::atomic<unsigned long> counter{0};
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename into " + path.string() + ": " + ec.message());
    }
}

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {}

std::string ArtifactStore::encode_user_id(std::string_view user_id) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : user_id) {
        if (std::isalnum(c) || c == '_' || c == '-') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xF];
        }
    }
    return out;
}

std::string ArtifactStore::decode_user_id(std::string_view encoded) {
    auto nibble = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw ValidationError("malformed user directory name \"" + std::string(encoded) + "\"");
    };
    std::string out;
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        if (encoded[i] != '%') {
            out += encoded[i];
            continue;
        }
        if (i + 2 >= encoded.size()) nibble('?');
        out += static_cast<char>(nibble(encoded[i + 1]) * 16 + nibble(encoded[i + 2]));
        i += 2;
    }
    return out;
}

fs::path ArtifactStore::user_dir(std::string_view user_id) const {
    if (user_id.empty()) throw ContractError("empty user id");
    return root_ / "users" / encode_user_id(user_id);
}

std::vector<std::string> ArtifactStore::users() const {
    std::vector<std::string> out;
    const fs::path dir = root_ / "users";
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory() || !fs::exists(entry.path() / "timeline.jsonl")) continue;
        out.push_back(decode_user_id(entry.path().filename().string()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool ArtifactStore::has_user(std::string_view user_id) const {
    return !user_id.empty() && fs::exists(user_dir(user_id) / "timeline.jsonl");
}

void ArtifactStore::write_manifest(const PipelineConfig& cfg, const std::string& prompt_version) const {
    Json m{{"format_version", kArtifactFormatVersion},
           {"config_hash", config_hash(cfg)},
           {"prompt_version", prompt_version},
           {"config", to_json(cfg)}};
    write_file_atomic(root_ / "manifest.json", m.dump(2) + "\n");
}

std::optional<Json> ArtifactStore::read_manifest() const {
    const fs::path path = root_ / "manifest.json";
    if (!fs::exists(path)) return std::nullopt;
    Json j = Json::parse(read_text(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError(path.string() + ": invalid JSON");
    return j;
}

void ArtifactStore::write_rejections(std::span<const Rejection> rejections, const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& r : rejections) rows.push_back(to_json(r));
    write_file_atomic(root_ / "rejections.jsonl", jsonl(header_line("rejections", hash), rows));
}

void ArtifactStore::write_failures(std::span<const UserFailure> failures, const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& f : failures) {
        rows.push_back(Json{{"user_id", f.user_id}, {"stage", f.stage}, {"variant", f.variant}, {"error", f.error}});
    }
    write_file_atomic(root_ / "failures.jsonl", jsonl(header_line("failures", hash), rows));
}

std::vector<UserFailure> ArtifactStore::read_failures() const {
    const fs::path path = root_ / "failures.jsonl";
    if (!fs::exists(path)) return {};
    return corrupt_guard(path, [&] {
        std::vector<UserFailure> out;
        for (const auto& r : read_jsonl(path, "failures")) {
            out.push_back({r.at("user_id").get<std::string>(), r.at("stage").get<std::string>(),
                           r.at("variant").get<std::string>(), r.at("error").get<std::string>()});
        }
        return out;
    });
}

void ArtifactStore::write_timeline(const Timeline& timeline, const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& e : timeline.events) rows.push_back(to_json(e));
    write_file_atomic(user_dir(timeline.user_id) / "timeline.jsonl",
                      jsonl(header_line("timeline", hash, {{"user_id", timeline.user_id}}), rows));
}

Timeline ArtifactStore::read_timeline(std::string_view user_id) const {
    const fs::path path = user_dir(user_id) / "timeline.jsonl";
    return corrupt_guard(path, [&] {
        Timeline t{std::string(user_id), {}};
        for (const auto& r : read_jsonl(path, "timeline")) t.events.push_back(event_from_json(r));
        return t;
    });
}

void ArtifactStore::write_enriched(std::string_view user_id, std::span<const EnrichedEvent> events,
                                   const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& e : events) rows.push_back(to_json(e));
    write_file_atomic(user_dir(user_id) / "enriched.jsonl",
                      jsonl(header_line("enriched", hash, {{"user_id", std::string(user_id)}}), rows));
}

std::vector<EnrichedEvent> ArtifactStore::read_enriched(std::string_view user_id) const {
    const fs::path path = user_dir(user_id) / "enriched.jsonl";
    return corrupt_guard(path, [&] {
        std::vector<EnrichedEvent> out;
        for (const auto& r : read_jsonl(path, "enriched")) out.push_back(enriched_from_json(r));
        return out;
    });
}

void ArtifactStore::write_series(const DailySeries& series, const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& p : series.points) rows.push_back(to_json(p));
    Json extra{{"user_id", series.user_id}, {"smoothing_window", series.smoothing_window}};
    write_file_atomic(user_dir(series.user_id) / "trajectory.jsonl", jsonl(header_line("trajectory", hash, extra), rows));
}

DailySeries ArtifactStore::read_series(std::string_view user_id) const {
    const fs::path path = user_dir(user_id) / "trajectory.jsonl";
    return corrupt_guard(path, [&] {
        Json header;
        DailySeries s;
        s.user_id = std::string(user_id);
        for (const auto& r : read_jsonl(path, "trajectory", &header)) s.points.push_back(point_from_json(r));
        s.smoothing_window = header.value("smoothing_window", 1);
        validate_series(s);
        return s;
    });
}

void ArtifactStore::write_segmentation(std::string_view user_id, AblationVariant variant,
                                       const Segmentation& segmentation, const std::string& hash) const {
    Json j = to_json(segmentation);
    std::vector<Json> rows;
    for (const auto& s : j["segments"]) rows.push_back(s);
    Json extra{{"user_id", std::string(user_id)},
               {"variant", std::string(to_string(variant))},
               {"method", j["method"]},
               {"k_max", j["k_max"]},
               {"change_points", j["change_points"]}};
    write_file_atomic(segmentation_path(user_dir(user_id), variant),
                      jsonl(header_line("segmentation", hash, extra), rows));
}

std::optional<Segmentation> ArtifactStore::read_segmentation(std::string_view user_id,
                                                             AblationVariant variant) const {
    const fs::path path = segmentation_path(user_dir(user_id), variant);
    if (!fs::exists(path)) return std::nullopt;
    return corrupt_guard(path, [&] {
        Json header;
        auto rows = read_jsonl(path, "segmentation", &header);
        Json j{{"method", header.at("method")},
               {"k_max", header.at("k_max")},
               {"segments", rows},
               {"change_points", header.at("change_points")}};
        return segmentation_from_json(j);
    });
}

void ArtifactStore::remove_segmentation(std::string_view user_id, AblationVariant variant) const {
    std::error_code ec;
    fs::remove(segmentation_path(user_dir(user_id), variant), ec);
}

void ArtifactStore::write_report(AblationVariant variant, const GlobalReport& report, const std::string& hash) const {
    Json j{{"header", header_line("report", hash, {{"user_id", report.user_id},
                                                  {"variant", std::string(to_string(variant))}})["header"]},
           {"report", to_json(report)}};
    write_file_atomic(report_path(user_dir(report.user_id), variant), j.dump(2) + "\n");
}

std::optional<GlobalReport> ArtifactStore::read_report(std::string_view user_id, AblationVariant variant) const {
    const fs::path path = report_path(user_dir(user_id), variant);
    if (!fs::exists(path)) return std::nullopt;
    return corrupt_guard(path, [&] {
        Json j = Json::parse(read_text(path), nullptr, false);
        if (j.is_discarded() || !j.contains("header") || !j.contains("report") ||
            j["header"].value("artifact", "") != "report") {
            throw ValidationError(path.string() + ": not a report artifact");
        }
        return report_from_json(j["report"]);
    });
}

std::vector<AblationVariant> ArtifactStore::report_variants(std::string_view user_id) const {
    std::vector<AblationVariant> out;
    for (auto v : kAllVariants) {
        if (fs::exists(report_path(user_dir(user_id), v))) out.push_back(v);
    }
    return out;
}

void ArtifactStore::write_notes(std::string_view user_id, std::span<const Note> notes, const std::string& hash) const {
    std::vector<Json> rows;
    for (const auto& n : notes) rows.push_back(to_json(n, std::string(user_id)));
    write_file_atomic(user_dir(user_id) / "notes.jsonl",
                      jsonl(header_line("notes", hash, {{"user_id", std::string(user_id)}}), rows));
}

std::vector<Note> ArtifactStore::read_notes(std::string_view user_id) const {
    const fs::path path = user_dir(user_id) / "notes.jsonl";
    if (!fs::exists(path)) return {};
    return corrupt_guard(path, [&] {
        std::vector<Note> out;
        for (const auto& r : read_jsonl(path, "notes")) out.push_back(note_from_json(r));
        return out;
    });
}

void ArtifactStore::write_index_metadata(const EvidenceIndex& index, const std::string& hash) const {
    std::map<std::string, std::size_t> kinds;
    Json keys = Json::array();
    for (const auto& d : index.documents()) {
        ++kinds[std::string(to_string(d.kind))];
        keys.push_back(d.key);
    }
    Json j{{"header", header_line("index", hash, {{"user_id", index.user_id()}})["header"]},
           {"documents", index.size()},
           {"kinds", kinds},
           {"keys", keys}};
    write_file_atomic(user_dir(index.user_id()) / "index.json", j.dump(2) + "\n");
}

EvidenceIndex build_user_index(const ArtifactStore& store, std::string_view user_id) {
    const auto enriched = store.read_enriched(user_id);
    std::vector<Segment> segments;
    if (auto seg = store.read_segmentation(user_id, AblationVariant::full)) segments = seg->segments;
    std::vector<PhaseReport> phases;
    if (auto report = store.read_report(user_id, AblationVariant::full)) phases = report->phases;
    return EvidenceIndex::build(std::string(user_id), enriched, segments, phases, store.read_notes(user_id));
}

// -- pipeline ----------------------------------------------------------------

namespace {

std::map<std::string, std::vector<Note>> load_notes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, std::vector<Note>> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError("not a JSON object", n);
        if (!j.contains("user_id") || !j["user_id"].is_string()) throw ParseError("missing user_id", n);
        try {
            out[j["user_id"].get<std::string>()].push_back(note_from_json(j));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), n);
        }
    }
    return out;
}

int stage_rank(const std::string& stage) {
    static const std::vector<std::string> order{"ingest", "enrich", "trajectory", "segment", "report"};
    return static_cast<int>(std::find(order.begin(), order.end(), stage) - order.begin());
}

void finish(RunSummary& s) {
    std::sort(s.succeeded.begin(), s.succeeded.end());
    std::stable_sort(s.failures.begin(), s.failures.end(), [](const UserFailure& a, const UserFailure& b) {
        if (a.user_id != b.user_id) return a.user_id < b.user_id;
        return stage_rank(a.stage) < stage_rank(b.stage);
    });
}

/// Runs `fn(user)` across users; each user's failures go to its own slot.
template <typename Fn>
RunSummary for_each_user(const std::vector<std::string>& users, std::size_t parallelism, Fn&& fn) {
    std::vector<std::vector<UserFailure>> slots(users.size());
    detail::parallel_for(users.size(), parallelism, [&](std::size_t i) { fn(users[i], slots[i]); });
    RunSummary s;
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (slots[i].empty()) {
            s.succeeded.push_back(users[i]);
        } else {
            s.failures.insert(s.failures.end(), slots[i].begin(), slots[i].end());
        }
    }
    finish(s);
    return s;
}

template <typename Fn>
bool guarded(std::vector<UserFailure>& failures, const std::string& user, const char* stage,
             std::string_view variant, Fn&& fn) {
    try {
        fn();
        return true;
    } catch (const std::exception& e) {
        spdlog::warn("user {}: {} failed: {}", user, stage, e.what());
        failures.push_back({user, stage, std::string(variant), e.what()});
        return false;
    }
}

void enrich_user(const PipelineConfig& cfg, const ArtifactStore& store, ClassifierBackend& classifier,
                 const std::string& user, const TopicAssignments* topics, const std::string& hash) {
    const auto enriched = enrich_timeline(store.read_timeline(user), classifier, cfg, topics);
    store.write_enriched(user, enriched, hash);
}

void trajectory_user(const PipelineConfig& cfg, const ArtifactStore& store, const std::string& user,
                     const std::string& hash) {
    const auto enriched = store.read_enriched(user);
    store.write_series(smooth(aggregate_daily(enriched), cfg.smoothing_window), hash);
}

void segment_user(const PipelineConfig& cfg, const ArtifactStore& store, const std::string& user,
                  AblationVariant variant, const std::string& hash) {
    const VariantPlan plan = plan_for(variant, cfg);
    if (!plan.segmentation) {
        store.remove_segmentation(user, variant);
        return;
    }
    const DailySeries series = smooth(store.read_series(user), plan.smoothing_window);
    auto segmentation = segment_for(series, plan, cfg);
    validate_segmentation(*segmentation, series);
    store.write_segmentation(user, variant, *segmentation, hash);
}

void report_user(const PipelineConfig& cfg, const ArtifactStore& store, GenerationBackend& generator,
                 const PromptSet& prompts, const std::string& user, AblationVariant variant, const std::string& hash) {
    const VariantPlan plan = plan_for(variant, cfg);
    const auto enriched = store.read_enriched(user);
    std::optional<Segmentation> segmentation;
    if (plan.segmentation) {
        segmentation = store.read_segmentation(user, variant);
        if (!segmentation) {
            throw NotFoundError("no " + std::string(to_string(variant)) + " segmentation stored; run segment first");
        }
        validate_segmentation(*segmentation, store.read_series(user));
    }
    store.write_report(variant, report_for(generator, user, enriched, segmentation, plan, cfg, prompts), hash);
    store.write_index_metadata(build_user_index(store, user), hash);
}

std::vector<std::string> resolve_users(const ArtifactStore& store, const std::vector<std::string>& requested) {
    if (requested.empty()) return store.users();
    for (const auto& u : requested) {
        if (!store.has_user(u)) throw NotFoundError("user \"" + u + "\" has no stored timeline");
    }
    std::vector<std::string> out = requested;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

RunSummary stage_ingest(const PipelineConfig& cfg, const RunInputs& inputs, const ArtifactStore& store,
                        const std::vector<std::string>& users) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    const auto parsed = parse_events_file(inputs.events, inputs.format);
    auto result = ingest(parsed, cfg.prep);
    std::map<std::string, std::vector<Note>> notes;
    if (inputs.notes) notes = load_notes(*inputs.notes);

    const std::set<std::string> wanted(users.begin(), users.end());
    auto selected = [&](const std::string& u) { return wanted.empty() || wanted.count(u) > 0; };

    std::set<std::string> seen;
    for (const auto& r : parsed.records) {
        if (selected(r.user_id)) seen.insert(r.user_id);
    }
    std::map<std::string, std::map<std::string, int>> removed;
    for (const auto& r : result.removed) ++removed[r.event.user_id][std::string(to_string(r.rule))];

    RunSummary s;
    s.rejections = result.rejections.size();
    for (const auto& t : result.timelines) {
        if (!selected(t.user_id)) continue;
        seen.erase(t.user_id);
        store.write_timeline(t, hash);
        const auto it = notes.find(t.user_id);
        store.write_notes(t.user_id, it == notes.end() ? std::vector<Note>{} : it->second, hash);
        s.succeeded.push_back(t.user_id);
        if (!removed[t.user_id].empty()) {
            spdlog::info("user {}: removed {}", t.user_id, Json(removed[t.user_id]).dump());
        }
    }
    for (const auto& u : seen) s.failures.push_back({u, "ingest", "", "no record with a usable timestamp"});
    store.write_rejections(result.rejections, hash);
    finish(s);
    return s;
}

RunSummary stage_enrich(const PipelineConfig& cfg, const ArtifactStore& store, ClassifierBackend& classifier,
                        const std::vector<std::string>& users, const TopicAssignments* topics) {
    const std::string hash = config_hash(cfg);
    return for_each_user(resolve_users(store, users), cfg.user_parallelism,
                         [&](const std::string& u, std::vector<UserFailure>& f) {
                             guarded(f, u, "enrich", "", [&] { enrich_user(cfg, store, classifier, u, topics, hash); });
                         });
}

RunSummary stage_trajectory(const PipelineConfig& cfg, const ArtifactStore& store,
                            const std::vector<std::string>& users) {
    const std::string hash = config_hash(cfg);
    return for_each_user(resolve_users(store, users), cfg.user_parallelism,
                         [&](const std::string& u, std::vector<UserFailure>& f) {
                             guarded(f, u, "trajectory", "", [&] { trajectory_user(cfg, store, u, hash); });
                         });
}

RunSummary stage_segment(const PipelineConfig& cfg, const ArtifactStore& store, const std::vector<std::string>& users,
                         AblationVariant variant) {
    const std::string hash = config_hash(cfg);
    return for_each_user(resolve_users(store, users), cfg.user_parallelism,
                         [&](const std::string& u, std::vector<UserFailure>& f) {
                             guarded(f, u, "segment", to_string(variant),
                                     [&] { segment_user(cfg, store, u, variant, hash); });
                         });
}

RunSummary stage_report(const PipelineConfig& cfg, const ArtifactStore& store, GenerationBackend& generator,
                        const std::vector<std::string>& users, AblationVariant variant) {
    const std::string hash = config_hash(cfg);
    const PromptSet prompts = make_prompts(cfg.generator);
    return for_each_user(resolve_users(store, users), cfg.user_parallelism,
                         [&](const std::string& u, std::vector<UserFailure>& f) {
                             guarded(f, u, "report", to_string(variant),
                                     [&] { report_user(cfg, store, generator, prompts, u, variant, hash); });
                         });
}

RunSummary run_pipeline(const PipelineConfig& cfg, const RunInputs& inputs, const ArtifactStore& store,
                        const RunOptions& options) {
    cfg.validate();
    const std::string hash = config_hash(cfg);
    std::vector<AblationVariant> variants = options.variants;
    if (variants.empty()) variants.push_back(cfg.variant);

    std::unique_ptr<ClassifierBackend> own_classifier;
    ClassifierBackend* classifier = options.classifier;
    if (!classifier) {
        own_classifier = make_classifier(cfg.classifier);
        classifier = own_classifier.get();
    }
    std::unique_ptr<GenerationBackend> own_generator;
    GenerationBackend* generator = options.generator;
    if (!generator) {
        own_generator = make_generator(cfg.generator);
        generator = own_generator.get();
    }
    const PromptSet prompts = make_prompts(cfg.generator);
    std::optional<TopicAssignments> topics;
    if (inputs.topics) topics = load_topic_assignments(*inputs.topics);

    RunSummary ingested = stage_ingest(cfg, inputs, store, options.users);

    RunSummary s = for_each_user(ingested.succeeded, cfg.user_parallelism, [&](const std::string& u,
                                                                                std::vector<UserFailure>& f) {
        if (!guarded(f, u, "enrich", "",
                     [&] { enrich_user(cfg, store, *classifier, u, topics ? &*topics : nullptr, hash); })) {
            return;
        }
        if (!guarded(f, u, "trajectory", "", [&] { trajectory_user(cfg, store, u, hash); })) return;
        for (auto v : variants) {
            if (!guarded(f, u, "segment", to_string(v), [&] { segment_user(cfg, store, u, v, hash); })) continue;
            guarded(f, u, "report", to_string(v), [&] { report_user(cfg, store, *generator, prompts, u, v, hash); });
        }
    });
    s.rejections = ingested.rejections;
    s.failures.insert(s.failures.end(), ingested.failures.begin(), ingested.failures.end());
    finish(s);

    store.write_failures(s.failures, hash);
    store.write_manifest(cfg, prompts.version());
    return s;
}

}  // namespace phasetrace
