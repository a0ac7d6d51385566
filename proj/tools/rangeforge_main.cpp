#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "rangeforge/experiment.hpp"
#include "rangeforge/io.hpp"

namespace fs = std::filesystem;
using namespace rangeforge;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// --out wins, then RANGEFORGE_OUTPUT_DIR, then the config's output.dir.
fs::path resolve_output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("RANGEFORGE_OUTPUT_DIR"); env && *env) return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  throw ConfigError("no output directory: pass --out, set RANGEFORGE_OUTPUT_DIR, or set output.dir");
}

ScenarioSpec load_scenario_spec(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  // Either a full experiment config or a bare scenario block.
  if (j.is_object() && j.contains("scenario")) return parse_scenario_spec(j.at("scenario"), "$.scenario");
  return parse_scenario_spec(j, "$");
}

int cmd_generate(const std::string& config, const std::string& out, bool binary) {
  const ScenarioSpec spec = load_scenario_spec(config);
  const Scenario scenario = generate_scenario(spec);
  write_scenario(scenario, out, binary ? SweepStorage::BinaryF32 : SweepStorage::NdJson);
  std::cerr << "wrote " << scenario.sweeps.size() << " frames to " << out << "\n";
  return 0;
}

int cmd_run(const std::string& config, const std::string& out, bool parallel, bool frontier) {
  const ExperimentConfig cfg = load_experiment_config(config);
  const fs::path dir = resolve_output_dir(out, cfg);
  const ExperimentResult result = run_experiment(cfg, {parallel, frontier});
  write_experiment_outputs(result, dir);
  std::cerr << "wrote " << result.reports.size() << " reports to " << dir.string() << "\n";
  return 0;
}

int cmd_frontier(const std::string& config, const std::string& out, bool parallel) {
  const ExperimentConfig cfg = load_experiment_config(config);
  if (!cfg.frontier && cfg.pipelines.empty()) throw ConfigError("$.frontier: missing");
  const ExperimentResult result = run_experiment(cfg, {parallel, true});
  write_file_atomic(out, emit_frontier_csv(result.reports));
  return 0;
}

int cmd_eval(const std::string& dets_path, const std::string& gt_path, const std::string& bands_text,
             const std::string& format, const std::string& method, const std::string& out) {
  const ReportFormat fmt = parse_report_format(format);
  const std::vector<RangeBand> bands = parse_bands(bands_text);
  const auto dets = boxes_from_ndjson(read_text_file(dets_path));
  const auto gts = boxes_from_ndjson(read_text_file(gt_path));
  if (dets.size() != gts.size()) {
    throw ConfigError("--dets has " + std::to_string(dets.size()) + " frames but --gt has " +
                      std::to_string(gts.size()));
  }
  CohortReport report = evaluate_cohorts(dets, gts, bands, MatchSpec{});
  report.method = method;
  const std::string text = emit_report(report, fmt);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  return 0;
}

int cmd_timing(const std::string& measurements, const std::string& out) {
  const auto rows = parse_timing_csv(read_text_file(measurements));
  const CalibrationResult fit = calibrate_latency(rows);
  write_file_atomic(out, calibration_to_json(fit).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-tuned 3D detection pipelines over synthetic LiDAR scenarios"};
  app.require_subcommand(1);

  std::string config, out, dets, gt, bands = "0:50,50:100,100:150", format = "csv", method = "detections",
                                        measurements;
  bool binary = false, parallel = false, frontier = false;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic scenario");
  gen->add_option("--config", config, "Scenario or experiment config (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_flag("--binary", binary, "Store sweeps as columnar float32");

  auto* run = app.add_subcommand("run", "Run an experiment and write reports");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory");
  run->add_flag("--parallel", parallel, "Run independent pipelines concurrently");
  run->add_flag("--frontier", frontier, "Include the frontier sweep");

  auto* ev = app.add_subcommand("eval", "Evaluate detections against ground truth");
  ev->add_option("--dets", dets, "Detections (NDJSON)")->required();
  ev->add_option("--gt", gt, "Ground truth (NDJSON)")->required();
  ev->add_option("--bands", bands, "Range bands, e.g. 0:50,50:100,100:inf");
  ev->add_option("--format", format, "csv or json");
  ev->add_option("--method", method, "Method name in the report");
  ev->add_option("--out", out, "Write to a file instead of stdout");

  auto* fr = app.add_subcommand("frontier", "Accuracy/latency points for every pipeline");
  fr->add_option("--config", config, "Experiment config (JSON)")->required();
  fr->add_option("--out", out, "Output CSV")->required();
  fr->add_flag("--parallel", parallel, "Run independent pipelines concurrently");

  auto* tm = app.add_subcommand("timing", "Fit the latency model to measured stage timings");
  tm->add_option("--measurements", measurements, "Timing table (CSV)")->required();
  tm->add_option("--out", out, "Output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(config, out, binary);
    if (*run) return cmd_run(config, out, parallel, frontier);
    if (*ev) return cmd_eval(dets, gt, bands, format, method, out);
    if (*fr) return cmd_frontier(config, out, parallel);
    if (*tm) return cmd_timing(measurements, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
