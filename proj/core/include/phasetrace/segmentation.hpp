/// @file segmentation.hpp
/// @brief Top-down piecewise-linear segmentation of a daily series.
///
/// Points are (x = days elapsed, y = smoothed score) in raw units. Starting
/// from one segment spanning the whole series, the segment whose interior
/// point lies farthest from its chord is split at that point, until K
/// segments exist or no segment has an interior point off its chord.
/// Consecutive segments share their boundary point.
///
/// Indices in this API are 0-based; exported artifacts use 1-based `a`/`b`.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasetrace/time.hpp"
#include "phasetrace/trajectory.hpp"

namespace phasetrace {

inline constexpr std::size_t kDefaultMaxSegments = 10;
inline constexpr double kDefaultTrendThreshold = 0.001;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Distance from `p` to the infinite line through `a` and `b`.
/// Throws ContractError when a.x == b.x.
double perp_distance(Point p, Point a, Point b);

struct SplitCandidate {
    double error = 0.0;
    std::size_t split_index = 0;
};

/// Largest interior deviation from the chord of [first, last] and the first
/// index attaining it. `nullopt` when the segment has no interior point.
std::optional<SplitCandidate> segment_error(std::span<const Point> points, std::size_t first,
                                            std::size_t last);

struct IndexRange {
    std::size_t first = 0;
    std::size_t last = 0;

    bool operator==(const IndexRange&) const = default;
};

/// Greedy top-down splitting. Ties between interior points go to the smaller
/// index; ties between segments go to the earlier one. Needs >= 2 points.
std::vector<IndexRange> topdown_ranges(std::span<const Point> points, std::size_t max_segments);

/// Splits [x_0, x_last] into `windows` equal spans and snaps each interior
/// window boundary to the nearest active day (earlier one on ties). Windows
/// without active days collapse away.
std::vector<IndexRange> fixed_window_ranges(std::span<const int> day_offsets, std::size_t windows);

enum class Trend { worsening, improving, stable };

std::string_view to_string(Trend trend);
Trend parse_trend(std::string_view text);

struct Segment {
    std::size_t first = 0;
    std::size_t last = 0;
    Date start_date;
    Date end_date;
    double mean_severity = 0.0;
    double slope = 0.0;  ///< least-squares score units per day
    Trend trend = Trend::stable;
    std::size_t position = 1;  ///< 1-based
    std::size_t total = 1;

    bool operator==(const Segment&) const = default;
};

enum class SegmentationMethod { topdown, fixed_window, whole };

std::string_view to_string(SegmentationMethod method);
SegmentationMethod parse_segmentation_method(std::string_view text);

struct Segmentation {
    std::vector<Segment> segments;
    std::vector<Date> change_points;
    std::size_t k_max = kDefaultMaxSegments;
    SegmentationMethod method = SegmentationMethod::topdown;

    bool operator==(const Segmentation&) const = default;
};

struct SegmentOptions {
    std::size_t max_segments = kDefaultMaxSegments;
    double trend_threshold = kDefaultTrendThreshold;
};

std::vector<Point> to_points(const DailySeries& series);

/// Descriptors over the smoothed values of [first, last].
Segment describe_segment(const DailySeries& series, std::size_t first, std::size_t last,
                         std::size_t position, std::size_t total,
                         double trend_threshold = kDefaultTrendThreshold);

/// Throws SeriesTooShortError for n < 2, ContractError for K == 0.
Segmentation topdown_segment(const DailySeries& series, const SegmentOptions& options = {});
Segmentation fixed_window_segment(const DailySeries& series, const SegmentOptions& options = {});
/// Single segment [0, n-1].
Segmentation whole_series_segment(const DailySeries& series, const SegmentOptions& options = {});

Segmentation segment_series(const DailySeries& series, SegmentationMethod method,
                            const SegmentOptions& options = {});

/// Builds segments + change points from ranges sorted by `first`.
Segmentation assemble_segmentation(const DailySeries& series, const std::vector<IndexRange>& ranges,
                                   SegmentationMethod method, const SegmentOptions& options);

/// Coverage, shared endpoints, K bound and date consistency against `series`.
/// Throws ValidationError.
void validate_segmentation(const Segmentation& segmentation, const DailySeries& series);

}  // namespace phasetrace
