/// @file serialization.hpp
/// @brief JSON forms of every persisted artifact and of the pipeline config.
///
/// Field names are stable snake_case. Segment indices are 1-based in JSON
/// (`a`, `b`) and 0-based in memory. Readers throw ParseError on malformed
/// input.

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "phasetrace/enrichment.hpp"
#include "phasetrace/ingestion.hpp"
#include "phasetrace/pipeline.hpp"
#include "phasetrace/reporting.hpp"
#include "phasetrace/retrieval.hpp"
#include "phasetrace/segmentation.hpp"
#include "phasetrace/trajectory.hpp"

namespace phasetrace {

using Json = nlohmann::ordered_json;

Json to_json(const Event& e);
Event event_from_json(const Json& j);

Json to_json(const Rejection& r);

Json to_json(const ClassDistribution& d);
ClassDistribution distribution_from_json(const Json& j);

Json to_json(const EnrichedEvent& e);
EnrichedEvent enriched_from_json(const Json& j);

/// {date, x, raw, smoothed, event_count}
Json to_json(const DailyPoint& p);
DailyPoint point_from_json(const Json& j);

/// {a, b, start_date, end_date, mean_severity, slope, trend, position}
Json to_json(const Segment& s);
Segment segment_from_json(const Json& j, std::size_t total);

/// {user_id, variant, method, k_max, segments:[...], change_points:[...]}
Json to_json(const Segmentation& s);
Segmentation segmentation_from_json(const Json& j);

Json to_json(const SegmentRef& r);
SegmentRef segment_ref_from_json(const Json& j);

/// {user_id, mode, phases:[{segment_ref, text, evidence}], overall, prompt_version}
Json to_json(const GlobalReport& r);
GlobalReport report_from_json(const Json& j);

/// {user_id, key, date?, text}
Note note_from_json(const Json& j);
Json to_json(const Note& n, const std::string& user_id);

Json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; the result is validated.
PipelineConfig config_from_json(const Json& j);
PipelineConfig load_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical config JSON.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace phasetrace
