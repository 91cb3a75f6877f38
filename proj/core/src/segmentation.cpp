#include "phasetrace/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "phasetrace/error.hpp"

namespace phasetrace {
namespace {

void require_length(std::size_t n) {
    if (n < 2) {
        throw SeriesTooShortError("segmentation needs at least 2 daily points, got " + std::to_string(n));
    }
}

}  // namespace

double perp_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    if (dx == 0.0) throw ContractError("perp_distance: chord endpoints share the same x");
    return std::abs(dy * (p.x - a.x) - dx * (p.y - a.y)) / std::hypot(dx, dy);
}

std::optional<SplitCandidate> segment_error(std::span<const Point> points, std::size_t first,
                                            std::size_t last) {
    if (last >= points.size() || first >= last) {
        throw ContractError("segment_error: invalid range [" + std::to_string(first) + ", " +
                            std::to_string(last) + "]");
    }
    if (last - first < 2) return std::nullopt;
    SplitCandidate best{-1.0, first + 1};
    for (std::size_t i = first + 1; i < last; ++i) {
        double d = perp_distance(points[i], points[first], points[last]);
        if (d > best.error) best = {d, i};
    }
    return best;
}

std::vector<IndexRange> topdown_ranges(std::span<const Point> points, std::size_t max_segments) {
    require_length(points.size());
    if (max_segments == 0) throw ContractError("max_segments must be at least 1");

    struct Piece {
        IndexRange range;
        std::optional<SplitCandidate> candidate;
    };
    auto make = [&](std::size_t first, std::size_t last) {
        return Piece{{first, last}, segment_error(points, first, last)};
    };

    // Kept sorted by start index, which is also the positional order.
    std::vector<Piece> pieces{make(0, points.size() - 1)};
    while (pieces.size() < max_segments) {
        std::optional<std::size_t> chosen;
        double best = 0.0;
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            const auto& c = pieces[p].candidate;
            if (c && c->error > best) {
                best = c->error;
                chosen = p;
            }
        }
        if (!chosen) break;
        const IndexRange r = pieces[*chosen].range;
        const std::size_t split = pieces[*chosen].candidate->split_index;
        pieces[*chosen] = make(r.first, split);
        pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(*chosen) + 1, make(split, r.last));
    }

    std::vector<IndexRange> out;
    out.reserve(pieces.size());
    for (const auto& p : pieces) out.push_back(p.range);
    return out;
}

std::vector<IndexRange> fixed_window_ranges(std::span<const int> day_offsets, std::size_t windows) {
    require_length(day_offsets.size());
    if (windows == 0) throw ContractError("window count must be at least 1");
    const std::size_t n = day_offsets.size();
    const long long x0 = day_offsets.front();
    const long long span = day_offsets.back() - x0;

    std::vector<std::size_t> cuts{0};
    for (std::size_t k = 1; k < windows && span > 0; ++k) {
        // Window boundary at x0 + k*span/windows, compared in units of 1/windows days.
        const long long target = x0 * static_cast<long long>(windows) + static_cast<long long>(k) * span;
        std::size_t nearest = 0;
        long long best = -1;
        for (std::size_t i = 0; i < n; ++i) {
            long long d = std::llabs(static_cast<long long>(day_offsets[i]) * static_cast<long long>(windows) - target);
            if (best < 0 || d < best) {
                best = d;
                nearest = i;
            }
        }
        if (nearest > cuts.back() && nearest < n - 1) cuts.push_back(nearest);
    }
    cuts.push_back(n - 1);

    std::vector<IndexRange> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) out.push_back({cuts[i], cuts[i + 1]});
    return out;
}

std::string_view to_string(Trend trend) {
    switch (trend) {
        case Trend::worsening: return "worsening";
        case Trend::improving: return "improving";
        case Trend::stable: return "stable";
    }
    return "stable";
}

Trend parse_trend(std::string_view text) {
    if (text == "worsening") return Trend::worsening;
    if (text == "improving") return Trend::improving;
    if (text == "stable") return Trend::stable;
    throw ParseError("unknown trend \"" + std::string(text) + "\"");
}

std::string_view to_string(SegmentationMethod method) {
    switch (method) {
        case SegmentationMethod::topdown: return "topdown";
        case SegmentationMethod::fixed_window: return "fixed_window";
        case SegmentationMethod::whole: return "whole";
    }
    return "topdown";
}

SegmentationMethod parse_segmentation_method(std::string_view text) {
    if (text == "topdown") return SegmentationMethod::topdown;
    if (text == "fixed_window") return SegmentationMethod::fixed_window;
    if (text == "whole") return SegmentationMethod::whole;
    throw ConfigError("unknown segmentation method \"" + std::string(text) + "\"");
}

std::vector<Point> to_points(const DailySeries& series) {
    std::vector<Point> pts;
    pts.reserve(series.points.size());
    for (const auto& p : series.points) pts.push_back({static_cast<double>(p.x), p.smoothed});
    return pts;
}

Segment describe_segment(const DailySeries& series, std::size_t first, std::size_t last,
                         std::size_t position, std::size_t total, double trend_threshold) {
    if (first >= last || last >= series.points.size()) {
        throw ContractError("describe_segment: invalid range [" + std::to_string(first) + ", " +
                            std::to_string(last) + "]");
    }
    const auto pts = std::span<const DailyPoint>(series.points).subspan(first, last - first + 1);
    const double m = static_cast<double>(pts.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& p : pts) {
        mean_x += p.x;
        mean_y += p.smoothed;
    }
    mean_x /= m;
    mean_y /= m;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pts) {
        sxy += (p.x - mean_x) * (p.smoothed - mean_y);
        sxx += (p.x - mean_x) * (p.x - mean_x);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;

    Segment s;
    s.first = first;
    s.last = last;
    s.start_date = pts.front().date;
    s.end_date = pts.back().date;
    s.mean_severity = mean_y;
    s.slope = slope;
    s.trend = slope > trend_threshold ? Trend::worsening
              : slope < -trend_threshold ? Trend::improving
                                         : Trend::stable;
    s.position = position;
    s.total = total;
    return s;
}

Segmentation assemble_segmentation(const DailySeries& series, const std::vector<IndexRange>& ranges,
                                   SegmentationMethod method, const SegmentOptions& options) {
    Segmentation out;
    out.k_max = options.max_segments;
    out.method = method;
    for (std::size_t k = 0; k < ranges.size(); ++k) {
        out.segments.push_back(describe_segment(series, ranges[k].first, ranges[k].last, k + 1,
                                                ranges.size(), options.trend_threshold));
        if (k > 0) out.change_points.push_back(out.segments.back().start_date);
    }
    return out;
}

Segmentation topdown_segment(const DailySeries& series, const SegmentOptions& options) {
    auto pts = to_points(series);
    return assemble_segmentation(series, topdown_ranges(pts, options.max_segments),
                                 SegmentationMethod::topdown, options);
}

Segmentation fixed_window_segment(const DailySeries& series, const SegmentOptions& options) {
    std::vector<int> xs;
    xs.reserve(series.points.size());
    for (const auto& p : series.points) xs.push_back(p.x);
    return assemble_segmentation(series, fixed_window_ranges(xs, options.max_segments),
                                 SegmentationMethod::fixed_window, options);
}

Segmentation whole_series_segment(const DailySeries& series, const SegmentOptions& options) {
    require_length(series.points.size());
    return assemble_segmentation(series, {{0, series.points.size() - 1}}, SegmentationMethod::whole, options);
}

Segmentation segment_series(const DailySeries& series, SegmentationMethod method,
                            const SegmentOptions& options) {
    switch (method) {
        case SegmentationMethod::topdown: return topdown_segment(series, options);
        case SegmentationMethod::fixed_window: return fixed_window_segment(series, options);
        case SegmentationMethod::whole: return whole_series_segment(series, options);
    }
    throw ConfigError("unknown segmentation method");
}

void validate_segmentation(const Segmentation& seg, const DailySeries& series) {
    const std::size_t n = series.points.size();
    const auto& s = seg.segments;
    if (s.empty()) throw ValidationError("segmentation has no segments");
    if (s.size() > seg.k_max && seg.method != SegmentationMethod::whole) {
        throw ValidationError("segmentation has more segments than its K bound");
    }
    if (s.front().first != 0 || s.back().last + 1 != n) {
        throw ValidationError("segmentation does not cover the series");
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k].first >= s[k].last || s[k].last >= n) throw ValidationError("segment with invalid range");
        if (k > 0 && s[k].first != s[k - 1].last) {
            throw ValidationError("consecutive segments do not share an endpoint");
        }
        if (s[k].start_date != series.points[s[k].first].date || s[k].end_date != series.points[s[k].last].date) {
            throw ValidationError("segment dates disagree with the series");
        }
        if (s[k].position != k + 1 || s[k].total != s.size()) {
            throw ValidationError("segment positions are inconsistent");
        }
    }
    if (seg.change_points.size() + 1 != s.size()) throw ValidationError("change point count mismatch");
    for (std::size_t k = 1; k < s.size(); ++k) {
        if (seg.change_points[k - 1] != s[k].start_date) throw ValidationError("change point date mismatch");
    }
}

}  // namespace phasetrace
