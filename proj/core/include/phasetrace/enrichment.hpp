/// @file enrichment.hpp
/// @brief Per-event class distributions and the scalar severity score.
///
/// Classifiers are external. A `ClassifierBackend` returns one distribution per
/// requested dimension for each event; the engine validates them and maps the
/// depression distribution to a score with `SeverityWeights`.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/ingestion.hpp"

namespace phasetrace {

inline constexpr std::string_view kDepressionDimension = "depression";
inline constexpr double kDistributionTolerance = 1e-6;

struct ClassDistribution {
    std::string dimension;
    std::map<std::string, double> probs;

    bool operator==(const ClassDistribution&) const = default;
};

/// Checks every probability lies in [0,1] and the total is 1 within
/// `kDistributionTolerance`, then renormalizes. Throws ValidationError.
ClassDistribution validate_distribution(ClassDistribution dist);

/// Class-name → non-negative weight. At least two distinct values.
class SeverityWeights {
public:
    /// no=0, moderate=1, severe=2
    SeverityWeights();
    explicit SeverityWeights(std::map<std::string, double> weights);

    const std::map<std::string, double>& weights() const noexcept { return weights_; }
    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }

    /// Every weight multiplied by `k` > 0.
    SeverityWeights scaled(double k) const;

    bool operator==(const SeverityWeights&) const = default;

private:
    std::map<std::string, double> weights_;
    double min_ = 0.0;
    double max_ = 0.0;
};

/// Σ_c w_c · p_c over the depression classes. Throws ContractError when the
/// dimension is not depression or the class sets differ.
double score_event(const ClassDistribution& dist, const SeverityWeights& weights);

struct EnrichedEvent {
    Event event;
    std::vector<ClassDistribution> distributions;
    double score = 0.0;
    std::optional<std::vector<std::string>> topics;

    const ClassDistribution* distribution(std::string_view dimension) const;
};

class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;

    /// Returns, for each event, one distribution per requested dimension.
    /// Must be safe to call from several threads at once.
    virtual std::vector<std::vector<ClassDistribution>> classify(
        std::span<const Event> events, std::span<const std::string> dimensions) = 0;
};

/// Annotations read from JSONL `{user_id, timestamp, dimension, probs}`.
class PrecomputedBackend final : public ClassifierBackend {
public:
    /// Throws ParseError (with line) on malformed records. Duplicate keys:
    /// the last record wins and a warning is recorded.
    static PrecomputedBackend from_stream(std::istream& in);

    std::vector<std::vector<ClassDistribution>> classify(
        std::span<const Event> events, std::span<const std::string> dimensions) override;

    /// Throws MissingAnnotationError naming the event when absent.
    const ClassDistribution& lookup(const EventKey& key, std::string_view dimension) const;

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    /// Distinct (event, dimension) entries.
    std::size_t size() const noexcept { return records_; }

private:
    std::map<EventKey, std::map<std::string, ClassDistribution, std::less<>>> table_;
    std::size_t records_ = 0;
    std::vector<std::string> warnings_;
};

/// Throws IoError / ParseError.
PrecomputedBackend load_precomputed(const std::filesystem::path& path);

struct ClassifyOptions {
    SeverityWeights weights;
    std::size_t batch_size = 16;
    std::size_t max_in_flight = 8;
};

/// Enriches every event of `timeline`. `dimensions` must contain "depression".
/// Output order follows the timeline regardless of backend completion order.
/// Throws ValidationError naming the event on a bad distribution; backend
/// errors (TransportError, MissingAnnotationError) propagate.
std::vector<EnrichedEvent> classify_events(const Timeline& timeline, ClassifierBackend& backend,
                                           std::span<const std::string> dimensions,
                                           const ClassifyOptions& options = {});

using TopicAssignments = std::map<EventKey, std::vector<std::string>>;

/// Best-effort join on (user_id, timestamp); unmatched events keep no topics.
std::vector<EnrichedEvent> attach_topics(std::vector<EnrichedEvent> events,
                                         const TopicAssignments& assignments);

/// JSONL `{user_id, timestamp, topics:[...]}`. Repeated keys merge their labels.
TopicAssignments load_topic_assignments(const std::filesystem::path& path);
TopicAssignments parse_topic_assignments(std::istream& in);

}  // namespace phasetrace
