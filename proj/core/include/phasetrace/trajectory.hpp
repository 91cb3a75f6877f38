/// @file trajectory.hpp
/// @brief Daily severity series and centered moving-average smoothing.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/time.hpp"

namespace phasetrace {

inline constexpr int kDefaultSmoothingWindow = 7;

struct DailyPoint {
    Date date;
    int x = 0;            ///< days elapsed since the first active day
    double raw = 0.0;     ///< mean event score of the day
    double smoothed = 0.0;
    int event_count = 0;

    bool operator==(const DailyPoint&) const = default;
};

/// One point per active day; calendar gaps show up only in `x`.
struct DailySeries {
    std::string user_id;
    std::vector<DailyPoint> points;
    int smoothing_window = 1;  ///< 1 means smoothed == raw

    std::size_t size() const noexcept { return points.size(); }
    bool operator==(const DailySeries&) const = default;
};

/// Groups events by calendar day (UTC). Each day's raw score is the mean of its
/// event scores, summed in ascending order so the result does not depend on
/// input order. `smoothed` starts equal to `raw`.
/// Throws EmptySeriesError on no events, ContractError on mixed users.
DailySeries aggregate_daily(std::span<const EnrichedEvent> events);

/// Centered moving average over active days with a window that shrinks at the
/// series ends. Raw values are untouched. Throws ConfigError unless `window`
/// is odd and positive.
DailySeries smooth(DailySeries series, int window);

/// Re-checks the series invariants (strictly increasing dates, x consistent
/// with dates, x[0] == 0, positive counts). Throws ValidationError.
void validate_series(const DailySeries& series);

}  // namespace phasetrace
