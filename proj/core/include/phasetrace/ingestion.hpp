/// @file ingestion.hpp
/// @brief Unified event model, trace-file parsing and timeline preparation.
///
/// Every digital trace becomes an `Event` (user, timestamp, source, text).
/// Parsing never drops a record silently: malformed records land in the
/// rejection list with their 1-based line number.

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/time.hpp"

namespace phasetrace {

struct Event {
    std::string user_id;
    Timestamp timestamp;
    std::string source;
    std::string text;

    bool operator==(const Event&) const = default;
};

/// Identity of an event across artifacts: (user_id, timestamp).
struct EventKey {
    std::string user_id;
    Timestamp timestamp;

    auto operator<=>(const EventKey&) const = default;
    bool operator==(const EventKey&) const = default;

    /// `user_id@YYYY-MM-DDTHH:MM:SSZ`
    std::string str() const;
};

inline EventKey key_of(const Event& e) { return {e.user_id, e.timestamp}; }

enum class TimestampStatus { present, missing, unparseable };

/// A parsed record before timestamp repair.
struct RawEvent {
    std::size_t line = 0;
    std::string user_id;
    std::optional<Timestamp> timestamp;
    TimestampStatus timestamp_status = TimestampStatus::missing;
    std::string source;
    std::string text;
};

struct Rejection {
    std::size_t line = 0;
    std::string reason;

    bool operator==(const Rejection&) const = default;
};

enum class InputFormat { jsonl, csv };

/// Throws ConfigError on an unknown tag.
InputFormat parse_input_format(std::string_view tag);

struct ParsedEvents {
    std::vector<RawEvent> records;
    std::vector<Rejection> rejections;
};

/// JSONL: one object per line with `user_id`, `timestamp`, `source`, `text`.
/// CSV: header row naming the same columns; RFC 4180 quoting.
/// Throws IoError if the stream goes bad mid-read.
ParsedEvents parse_events(std::istream& in, InputFormat format);
ParsedEvents parse_events_file(const std::filesystem::path& path, InputFormat format);

struct PrepConfig {
    std::size_t min_text_length = 1;  ///< in Unicode code points, measured after normalization
    bool dedup = true;
    bool lowercase = true;  ///< lowercases ASCII and collapses whitespace
    bool drop_unparseable_timestamps = true;
    bool infer_timestamps = true;

    bool operator==(const PrepConfig&) const = default;
};

struct Timeline {
    std::string user_id;
    std::vector<Event> events;
};

enum class RemovalRule { duplicate, too_short, unparseable_timestamp };

std::string_view to_string(RemovalRule rule);

struct Removal {
    Event event;
    RemovalRule rule;
};

struct PreparedTimeline {
    Timeline timeline;
    std::vector<Removal> removed;
};

/// Normalizes, filters, dedups and stably sorts one user's events.
/// Throws ContractError when events belong to more than one user.
PreparedTimeline prepare_timeline(std::vector<Event> events, const PrepConfig& cfg);

/// ASCII lowercase, whitespace runs collapsed to a single space, trimmed.
std::string normalize_text(std::string_view text);

std::size_t utf8_length(std::string_view text);
bool is_valid_utf8(std::string_view text);

struct TimestampRepair {
    std::vector<Event> events;
    std::vector<Rejection> rejections;
    std::size_t inferred = 0;
};

/// Fills each missing timestamp from record-order neighbours: the midpoint of
/// the nearest timestamped records before and after it, or a copy of the only
/// one available at either boundary.
/// Throws UnrecoverableDataError when no record carries a timestamp.
TimestampRepair infer_missing_timestamps(const std::vector<RawEvent>& records);

struct IngestResult {
    std::vector<Timeline> timelines;  ///< sorted by user_id
    std::vector<Rejection> rejections;
    std::vector<Removal> removed;
};

/// Groups parsed records by user, resolves timestamps per `cfg` and prepares
/// each timeline. A user whose records carry no usable timestamp is rejected
/// record by record rather than failing the batch.
IngestResult ingest(const ParsedEvents& parsed, const PrepConfig& cfg);

}  // namespace phasetrace
