#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rangeforge/detector.hpp"
#include "rangeforge/ensemble.hpp"
#include "rangeforge/eval.hpp"
#include "rangeforge/io.hpp"
#include "rangeforge/scenario.hpp"

namespace rangeforge {

enum class PipelineKind { Expert, Ensemble, NearFar };

struct PipelineSpec {
  std::string name;
  PipelineKind kind = PipelineKind::Expert;
  std::string expert;                 // Expert
  EnsembleSpec ensemble;              // Ensemble / NearFar
  std::vector<int> frequencies;       // NearFar
};

/// Single-expert pipelines generated for every (expert, inference range) pair.
struct FrontierSpec {
  std::vector<std::string> experts;
  std::vector<double> infer_ranges;
};

struct ExperimentConfig {
  std::optional<ScenarioSpec> scenario;
  std::filesystem::path scenario_path;  // used when `scenario` is empty
  std::size_t sweeps_per_frame = 5;
  std::vector<RangeExpertConfig> experts;
  std::vector<PipelineSpec> pipelines;
  std::optional<FrontierSpec> frontier;
  MatchSpec match;
  std::vector<RangeBand> bands = {RangeBand(0, 50), RangeBand(50, 100), RangeBand(100, 150)};
  std::filesystem::path output_dir;

  const RangeExpertConfig& expert(const std::string& name) const;
};

/// Parses and validates a config document. Errors name the offending JSON
/// path. Relative scenario paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ScenarioSpec parse_scenario_spec(const nlohmann::json& j, const std::string& path = "$.scenario");

struct PipelineRun {
  std::string name;
  std::vector<NearFarFrame> frames;
};

struct ExperimentResult {
  Scenario scenario;
  std::vector<PipelineRun> runs;
  std::vector<CohortReport> reports;
};

struct RunOptions {
  /// Evaluate independent pipelines concurrently. Output is identical either way.
  bool parallel = false;
  /// Also run the frontier sweep, if configured.
  bool include_frontier = false;
};

/// Expands the frontier block into single-expert pipelines.
std::vector<PipelineSpec> frontier_pipelines(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs one pipeline over a scenario.
PipelineRun run_pipeline(const ExperimentConfig& config, const PipelineSpec& pipeline, const Scenario& scenario);

/// Evaluates a pipeline run against the scenario truth.
CohortReport evaluate_run(const ExperimentConfig& config, const PipelineRun& run, const Scenario& scenario);

/// Writes report.json, report.csv and detections/<pipeline>.ndjson.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace rangeforge
