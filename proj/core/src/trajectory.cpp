#include "phasetrace/trajectory.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

double mean_of(std::span<const double> values) {
    double sum = std::accumulate(values.begin(), values.end(), 0.0);
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    // Rounding may push the quotient a hair outside the convex hull.
    return std::clamp(sum / static_cast<double>(values.size()), *lo, *hi);
}

}  // namespace

DailySeries aggregate_daily(std::span<const EnrichedEvent> events) {
    if (events.empty()) throw EmptySeriesError("cannot build a daily series from zero events");

    DailySeries series;
    series.user_id = events.front().event.user_id;
    std::map<Date, std::vector<double>> by_day;
    for (const auto& e : events) {
        if (e.event.user_id != series.user_id) {
            throw ContractError("aggregate_daily: events from users \"" + series.user_id + "\" and \"" +
                                e.event.user_id + "\" mixed");
        }
        by_day[to_date(e.event.timestamp)].push_back(e.score);
    }

    const Date first = by_day.begin()->first;
    series.points.reserve(by_day.size());
    for (auto& [date, scores] : by_day) {
        std::sort(scores.begin(), scores.end());
        double raw = mean_of(scores);
        series.points.push_back({date, static_cast<int>(days_between(first, date)), raw, raw,
                                 static_cast<int>(scores.size())});
    }
    return series;
}

DailySeries smooth(DailySeries series, int window) {
    if (window < 1 || window % 2 == 0) {
        throw ConfigError("smoothing window must be a positive odd integer, got " + std::to_string(window));
    }
    const std::size_t n = series.points.size();
    const std::size_t half = static_cast<std::size_t>(window - 1) / 2;
    std::vector<double> raw(n);
    std::transform(series.points.begin(), series.points.end(), raw.begin(),
                   [](const DailyPoint& p) { return p.raw; });
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(n - 1, i + half);
        series.points[i].smoothed = mean_of(std::span<const double>(raw).subspan(lo, hi - lo + 1));
    }
    series.smoothing_window = window;
    return series;
}

void validate_series(const DailySeries& series) {
    const auto& pts = series.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        if (p.event_count < 1) throw ValidationError("daily point " + format_date(p.date) + " has no events");
        if (p.x != days_between(pts.front().date, p.date)) {
            throw ValidationError("daily point " + format_date(p.date) + " has inconsistent day offset");
        }
        if (i > 0 && !(pts[i - 1].date < p.date)) {
            throw ValidationError("daily series dates are not strictly increasing at " + format_date(p.date));
        }
    }
    if (series.smoothing_window < 1 || series.smoothing_window % 2 == 0) {
        throw ValidationError("daily series carries an invalid smoothing window");
    }
}

}  // namespace phasetrace
