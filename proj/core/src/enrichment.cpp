#include "phasetrace/enrichment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "parallel.hpp"
#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

using json = nlohmann::json;

std::string describe(const Event& e) { return "event " + key_of(e).str(); }

std::string class_list(const std::map<std::string, double>& m) {
    std::string out;
    for (const auto& [name, value] : m) {
        if (!out.empty()) out += ",";
        out += name;
    }
    return "{" + out + "}";
}

}  // namespace

ClassDistribution validate_distribution(ClassDistribution dist) {
    if (dist.probs.empty()) {
        throw ValidationError("distribution for dimension \"" + dist.dimension + "\" has no classes");
    }
    double total = 0.0;
    for (const auto& [name, p] : dist.probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw ValidationError("probability of class \"" + name + "\" in dimension \"" +
                                  dist.dimension + "\" is outside [0,1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        std::ostringstream msg;
        msg << "probabilities for dimension \"" << dist.dimension << "\" sum to " << total
            << ", expected 1";
        throw ValidationError(msg.str());
    }
    for (auto& [name, p] : dist.probs) p /= total;
    return dist;
}

SeverityWeights::SeverityWeights() : SeverityWeights({{"no", 0.0}, {"moderate", 1.0}, {"severe", 2.0}}) {}

SeverityWeights::SeverityWeights(std::map<std::string, double> weights) : weights_(std::move(weights)) {
    std::set<double> distinct;
    for (const auto& [name, w] : weights_) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ConfigError("severity weight for class \"" + name + "\" must be a non-negative number");
        }
        distinct.insert(w);
    }
    if (distinct.size() < 2) throw ConfigError("severity weights need at least two distinct values");
    min_ = *distinct.begin();
    max_ = *distinct.rbegin();
}

SeverityWeights SeverityWeights::scaled(double k) const {
    if (!(k > 0.0)) throw ContractError("weight scale factor must be positive");
    auto copy = weights_;
    for (auto& [name, w] : copy) w *= k;
    return SeverityWeights(std::move(copy));
}

double score_event(const ClassDistribution& dist, const SeverityWeights& weights) {
    if (dist.dimension != kDepressionDimension) {
        throw ContractError("score_event expects the depression dimension, got \"" + dist.dimension + "\"");
    }
    const auto& w = weights.weights();
    bool same_classes = dist.probs.size() == w.size() &&
                        std::equal(dist.probs.begin(), dist.probs.end(), w.begin(),
                                   [](const auto& a, const auto& b) { return a.first == b.first; });
    if (!same_classes) {
        throw ContractError("class set " + class_list(dist.probs) + " does not match weights " +
                            class_list(w));
    }
    double score = 0.0;
    auto wit = w.begin();
    for (const auto& [name, p] : dist.probs) score += (wit++)->second * p;
    return std::clamp(score, weights.min(), weights.max());
}

const ClassDistribution* EnrichedEvent::distribution(std::string_view dimension) const {
    auto it = std::find_if(distributions.begin(), distributions.end(),
                           [&](const ClassDistribution& d) { return d.dimension == dimension; });
    return it == distributions.end() ? nullptr : &*it;
}

PrecomputedBackend PrecomputedBackend::from_stream(std::istream& in) {
    PrecomputedBackend backend;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw ParseError("not a JSON object", lineno);
        auto need = [&](const char* name) -> const json& {
            auto it = obj.find(name);
            if (it == obj.end()) throw ParseError(std::string("missing field \"") + name + "\"", lineno);
            return *it;
        };
        const json& user = need("user_id");
        const json& ts_field = need("timestamp");
        const json& dim_field = need("dimension");
        const json& probs = need("probs");
        if (!(user.is_string() || user.is_number_integer()) || !ts_field.is_string() ||
            !dim_field.is_string() || !probs.is_object()) {
            throw ParseError("field of unexpected type", lineno);
        }
        auto ts = parse_timestamp(ts_field.get<std::string>());
        if (!ts) throw ParseError("unparseable timestamp", lineno);

        ClassDistribution dist;
        dist.dimension = dim_field.get<std::string>();
        for (const auto& [name, value] : probs.items()) {
            if (!value.is_number()) throw ParseError("probability for \"" + name + "\" is not a number", lineno);
            dist.probs[name] = value.get<double>();
        }
        EventKey key{user.is_string() ? user.get<std::string>() : std::to_string(user.get<long long>()), *ts};
        auto& slot = backend.table_[key];
        auto [it, inserted] = slot.insert_or_assign(dist.dimension, std::move(dist));
        if (inserted) {
            ++backend.records_;
        } else {
            backend.warnings_.push_back("line " + std::to_string(lineno) + ": duplicate annotation for " +
                                        key.str() + " dimension \"" + it->first +
                                        "\"; keeping the later record");
            spdlog::warn("{}", backend.warnings_.back());
        }
    }
    if (in.bad()) throw IoError("read error while loading annotations");
    return backend;
}

const ClassDistribution& PrecomputedBackend::lookup(const EventKey& key, std::string_view dimension) const {
    auto it = table_.find(key);
    if (it != table_.end()) {
        auto dit = it->second.find(dimension);
        if (dit != it->second.end()) return dit->second;
    }
    throw MissingAnnotationError("no \"" + std::string(dimension) + "\" annotation for event " + key.str());
}

std::vector<std::vector<ClassDistribution>> PrecomputedBackend::classify(
    std::span<const Event> events, std::span<const std::string> dimensions) {
    std::vector<std::vector<ClassDistribution>> out;
    out.reserve(events.size());
    for (const auto& e : events) {
        auto& row = out.emplace_back();
        for (const auto& dim : dimensions) row.push_back(lookup(key_of(e), dim));
    }
    return out;
}

PrecomputedBackend load_precomputed(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations file " + path.string());
    return PrecomputedBackend::from_stream(in);
}

std::vector<EnrichedEvent> classify_events(const Timeline& timeline, ClassifierBackend& backend,
                                           std::span<const std::string> dimensions,
                                           const ClassifyOptions& options) {
    if (std::find(dimensions.begin(), dimensions.end(), kDepressionDimension) == dimensions.end()) {
        throw ContractError("classify_events: the depression dimension is required for scoring");
    }
    const auto& events = timeline.events;
    std::vector<EnrichedEvent> out(events.size());
    if (events.empty()) return out;

    const std::size_t batch = std::max<std::size_t>(options.batch_size, 1);
    const std::size_t batches = (events.size() + batch - 1) / batch;
    detail::parallel_for(batches, options.max_in_flight, [&](std::size_t b) {
        const std::size_t begin = b * batch;
        const std::size_t count = std::min(batch, events.size() - begin);
        auto slice = std::span<const Event>(events).subspan(begin, count);
        auto results = backend.classify(slice, dimensions);
        if (results.size() != count) {
            throw ValidationError("classifier returned " + std::to_string(results.size()) +
                                  " results for " + std::to_string(count) + " events");
        }
        for (std::size_t i = 0; i < count; ++i) {
            const Event& e = slice[i];
            EnrichedEvent enriched{e, {}, 0.0, std::nullopt};
            for (const auto& dim : dimensions) {
                auto it = std::find_if(results[i].begin(), results[i].end(),
                                       [&](const ClassDistribution& d) { return d.dimension == dim; });
                if (it == results[i].end()) {
                    throw ValidationError(describe(e) + ": classifier returned no \"" + dim + "\" distribution");
                }
                try {
                    enriched.distributions.push_back(validate_distribution(*it));
                } catch (const ValidationError& err) {
                    throw ValidationError(describe(e) + ": " + err.what());
                }
            }
            try {
                enriched.score = score_event(*enriched.distribution(kDepressionDimension), options.weights);
            } catch (const ContractError& err) {
                throw ValidationError(describe(e) + ": " + err.what());
            }
            out[begin + i] = std::move(enriched);
        }
    });
    return out;
}

std::vector<EnrichedEvent> attach_topics(std::vector<EnrichedEvent> events,
                                         const TopicAssignments& assignments) {
    if (assignments.empty()) return events;
    for (auto& e : events) {
        auto it = assignments.find(key_of(e.event));
        if (it != assignments.end()) e.topics = it->second;
    }
    return events;
}

TopicAssignments parse_topic_assignments(std::istream& in) {
    TopicAssignments out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("user_id") ||
            !obj.contains("timestamp") || !obj.contains("topics") || !obj["topics"].is_array() ||
            !obj["timestamp"].is_string()) {
            throw ParseError("expected {user_id, timestamp, topics:[...]}", lineno);
        }
        auto ts = parse_timestamp(obj["timestamp"].get<std::string>());
        if (!ts) throw ParseError("unparseable timestamp", lineno);
        const auto& user = obj["user_id"];
        EventKey key{user.is_string() ? user.get<std::string>() : user.dump(), *ts};
        auto& labels = out[key];
        for (const auto& t : obj["topics"]) {
            if (!t.is_string()) throw ParseError("topic labels must be strings", lineno);
            labels.push_back(t.get<std::string>());
        }
    }
    return out;
}

TopicAssignments load_topic_assignments(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topic assignments " + path.string());
    return parse_topic_assignments(in);
}

}  // namespace phasetrace
