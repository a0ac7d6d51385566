#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rangeforge/geometry.hpp"
#include "rangeforge/range_ops.hpp"

namespace rangeforge {

/// How an expert behaves when run at a range other than its training range.
enum class GeneralizationMode {
  LocalCalibrated,
  GlobalOverconfident,
  SoftTarget,
  /// Off-range inference (infer_range != train_range) suppresses all output
  /// with probability 0.98 per frame.
  AbsolutePeCollapse,
};

enum class ScoreCalibration { Calibrated, OverconfidentFar, ZeroOutsideTrain };

struct OracleParams {
  double base_recall = 0.9;
  double density_floor = 5.0;  // points on object below which recall decays
  double recall_decay = 1.0;
  double sigma_t0 = 0.05;       // m
  double sigma_t_slope = 0.002; // m per m of range
  double sigma_t_voxel = 0.2;   // m per m of voxel edge
  double yaw_sigma = 0.05;      // rad
  ScoreCalibration score_calibration = ScoreCalibration::Calibrated;
  double fp_rate = 1.0;  // expected false positives per frame
  std::uint64_t seed = 0;

  void validate() const;
};

/// Linear per-stage latency model.
struct LatencyParams {
  double c_point_per_kvoxel = 0.0;   // ms per 1000 occupied pillars
  double c_backbone_per_Mcell = 0.0; // ms per 1e6 grid cells
  double c_neck_per_Mcell = 0.0;     // ms per 1e6 grid cells
  double c_head = 0.0;               // ms
  double c_post = 0.0;               // ms

  void validate() const;
  bool operator==(const LatencyParams&) const = default;
};

struct StageTimings {
  double point_proc = 0.0;
  double backbone = 0.0;
  double neck = 0.0;
  double head = 0.0;
  double post_proc = 0.0;

  double total() const { return point_proc + backbone + neck + head + post_proc; }
  /// Network stages only (everything but post-processing).
  double network() const { return point_proc + backbone + neck + head; }

  StageTimings& operator+=(const StageTimings& o);
  bool operator==(const StageTimings&) const = default;
};

/// A range expert "r1/s -> r2": trained to r1 with voxel edge 1/s, run at r2.
struct RangeExpertConfig {
  std::string name;
  double train_range = 50.0;
  double voxel_reciprocal = 4.0;
  double infer_range = 50.0;
  GeneralizationMode generalization_mode = GeneralizationMode::LocalCalibrated;
  OracleParams oracle;
  LatencyParams latency;

  void validate() const;
  /// "r1/s -> r2" label.
  std::string label() const;
};

/// Named architecture preset: oracle behavior plus a latency model anchored on
/// a reference configuration measured at a nominal occupancy.
struct DetectorProfile {
  std::string name;
  GeneralizationMode generalization_mode;
  OracleParams oracle;
  LatencyParams latency;
  double reference_range;
  double reference_voxel_reciprocal;
  double reference_occupied;  // pillars at the reference config
  StageTimings reference_timings;
};

/// Presets: "pointpillars-like", "cbgs-like", "centerpoint-like", "transfusion-like".
const std::vector<DetectorProfile>& detector_profiles();
const DetectorProfile& detector_profile(const std::string& name);

/// Builds a latency model reproducing `timings` exactly for a grid of the given
/// side with `occupied` pillars.
LatencyParams anchor_latency(const StageTimings& timings, double side, double occupied);

StageTimings predict_latency(const LatencyParams& params, const SparsePillarGrid& grid);
StageTimings predict_latency(const LatencyParams& params, double side, double occupied);

struct TimingRow {
  double range = 0.0;
  double voxel_reciprocal = 0.0;
  double occupied = 0.0;
  StageTimings measured;
};

struct CalibrationResult {
  LatencyParams params;
  /// Per row, (predicted - measured) / measured for each stage; NaN where the
  /// measured value is 0.
  std::vector<StageTimings> relative_residuals;
};

/// Least-squares fit of the linear latency model. Requires at least two rows
/// with distinct grid areas.
CalibrationResult calibrate_latency(std::span<const TimingRow> rows);

/// Everything an expert sees for one frame.
struct DetectorInput {
  std::uint64_t frame_index = 0;
  std::span<const Box3D> truth;  // current ego frame
  std::span<const Point> cloud;  // current ego frame, after any cropping
  /// Largest range at which the scenario carries annotations.
  double annotation_range = std::numeric_limits<double>::infinity();
};

struct DetectorOutput {
  std::vector<Box3D> detections;
  /// Set when the expert's inference range exceeds the annotation range.
  bool beyond_annotation_range = false;
};

/// Pluggable detector contract.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual const RangeExpertConfig& config() const = 0;
  virtual DetectorOutput detect(const DetectorInput& input) const = 0;
};

/// Counts of cloud points inside each box's BEV footprint (z ignored).
std::vector<std::uint32_t> points_in_boxes_serial(std::span<const Box3D> boxes, std::span<const Point> cloud);
std::vector<std::uint32_t> points_in_boxes_parallel(std::span<const Box3D> boxes, std::span<const Point> cloud);

/// Synthetic detector emulating a range expert's accuracy behavior.
DetectorOutput oracle_detect(const RangeExpertConfig& config, const DetectorInput& input);

class OracleDetector final : public Detector {
 public:
  explicit OracleDetector(RangeExpertConfig config);
  const RangeExpertConfig& config() const override { return config_; }
  DetectorOutput detect(const DetectorInput& input) const override { return oracle_detect(config_, input); }

 private:
  RangeExpertConfig config_;
};

/// Deterministic 64-bit mixing used to derive per-(seed, frame, object) streams.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace rangeforge
