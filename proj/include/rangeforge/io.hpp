#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rangeforge/detector.hpp"
#include "rangeforge/eval.hpp"
#include "rangeforge/geometry.hpp"
#include "rangeforge/scenario.hpp"

namespace rangeforge {

/// Invalid configuration or input file; carries a JSON-path-like location.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view name);

// Boxes and poses.
nlohmann::json box_to_json(const Box3D& box);
Box3D box_from_json(const nlohmann::json& j, const std::string& path = "$");
nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j, const std::string& path = "$");

/// Per-frame box lists as newline-delimited JSON:
/// {"frame": i, "timestamp": t, "boxes": [...]}.
std::string boxes_to_ndjson(std::span<const std::vector<Box3D>> frames, std::span<const double> timestamps);
std::vector<std::vector<Box3D>> boxes_from_ndjson(std::string_view text);

enum class SweepStorage { NdJson, BinaryF32 };

/// Writes sweeps.ndjson (or sweeps.bin), gt.ndjson and scenario.json into `dir`.
void write_scenario(const Scenario& scenario, const std::filesystem::path& dir, SweepStorage storage);
/// Reads a directory written by write_scenario. Tracks are not stored.
Scenario read_scenario(const std::filesystem::path& dir);

/// Full-precision JSON form of one report.
nlohmann::json report_to_json(const CohortReport& report);
CohortReport report_from_json(const nlohmann::json& j);

/// CSV columns: method, band, class, ap, ate, ase, aoe, cds,
/// latency_mean_ms, latency_std_ms. One row per (band, class) plus an
/// "all" row per band.
std::string emit_report(std::span<const CohortReport> reports, ReportFormat format);
std::string emit_report(const CohortReport& report, ReportFormat format);
std::vector<CohortReport> parse_json_reports(std::string_view text);

/// One row per method: aggregate CDS per band, then latency. Suited to
/// accuracy/latency scatter plots.
std::string emit_frontier_csv(std::span<const CohortReport> reports);

/// Timing measurement table: range, voxel_reciprocal, occupied, point_proc,
/// backbone, neck, head, post_proc (header required, any column order).
std::vector<TimingRow> parse_timing_csv(std::string_view text);
nlohmann::json calibration_to_json(const CalibrationResult& result);

/// Parses "0:50,50:100,100:150"; "inf" is accepted as an outer bound.
std::vector<RangeBand> parse_bands(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Write-then-rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rangeforge
