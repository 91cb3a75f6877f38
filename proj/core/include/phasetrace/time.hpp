/// @file time.hpp
/// @brief Calendar helpers. All instants are UTC.

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace phasetrace {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

/// Parses ISO-8601 dates and date-times: `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS[.fff]]`
/// with an optional `Z` or `+HH:MM` offset. A space may replace `T`.
/// Times without a zone are taken as UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Strict `YYYY-MM-DD`.
std::optional<Date> parse_date(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_timestamp(Timestamp ts);

/// `YYYY-MM-DD`
std::string format_date(Date date);

inline Date to_date(Timestamp ts) { return std::chrono::floor<std::chrono::days>(ts); }

inline long days_between(Date from, Date to) { return (to - from).count(); }

}  // namespace phasetrace
