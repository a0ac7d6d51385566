#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rangeforge/detector.hpp"
#include "rangeforge/geometry.hpp"
#include "rangeforge/range_ops.hpp"

namespace rangeforge {

enum class NmsMode { Greedy, MaxPool };

/// Class-aware BEV center-distance NMS. Output is sorted by descending score
/// (ties: input index ascending).
std::vector<Box3D> greedy_nms(std::span<const Box3D> dets, double dist_thresh, NmsMode mode = NmsMode::Greedy);

struct ForecastResult {
  std::vector<Box3D> boxes;
  /// Boxes whose velocity was unknown and treated as zero.
  std::size_t missing_velocity = 0;
};

/// Constant-velocity forecast: compensate each box from the ego frame of
/// `pose_then` into that of `pose_now`, then advance its center by the
/// compensated velocity times dt.
ForecastResult forecast_detections(std::span<const Box3D> dets, double dt, const Pose& pose_then,
                                   const Pose& pose_now);

enum class CombineMode { BandRoute, NmsPool };

struct ExpertSlot {
  RangeExpertConfig config;
  RangeBand band;
};

struct EnsembleSpec {
  std::vector<ExpertSlot> experts;
  CombineMode combine_mode = CombineMode::BandRoute;
  bool test_time_mask = false;
  double nms_threshold = 2.0;
  RangeMode range_mode = RangeMode::BevL2;

  /// Bands pairwise disjoint and covering [0, max outer).
  void validate() const;
};

struct NearFarSpec {
  EnsembleSpec ensemble;
  std::vector<int> frequencies;  // one per expert, 1 = every frame

  void validate() const;
};

/// Combines per-expert detections already expressed in one ego frame.
std::vector<Box3D> combine_range_ensemble(const EnsembleSpec& spec,
                                          std::span<const std::vector<Box3D>> per_expert_dets);

/// Scenario stream stored once; frames view a suffix of the sweep list.
struct StreamView {
  std::span<const Sweep> sweeps;
  std::span<const std::vector<Box3D>> truth;  // one entry per sweep
  std::size_t sweeps_per_frame = 5;
  double annotation_range = std::numeric_limits<double>::infinity();
};

struct ExpertFrameRecord {
  bool ran = false;
  /// Age in frames of the source detections (0 when the expert ran).
  std::size_t source_age = 0;
  bool no_history = false;
  std::size_t missing_velocity = 0;
  StageTimings timings;  // zero when the expert did not run
  std::vector<Box3D> detections;  // current ego frame, before band routing
};

struct NearFarFrame {
  std::vector<Box3D> detections;
  StageTimings timings;  // summed over experts that ran
  std::vector<ExpertFrameRecord> experts;
};

/// Input each expert receives on frame `t`: the aggregated cloud, cropped to
/// the expert's band when test-time masking is on.
PointCloud expert_input(const EnsembleSpec& spec, std::size_t expert, std::span<const Point> aggregated);

/// Asynchronous near-far schedule: expert i runs on frame t iff
/// t mod frequencies[i] == 0, otherwise its last output is forecast. All
/// frequencies 1 gives the synchronous range ensemble.
std::vector<NearFarFrame> run_near_far(const NearFarSpec& spec, const StreamView& stream,
                                       std::span<const Detector* const> detectors);

/// Convenience overload running OracleDetectors built from the spec.
std::vector<NearFarFrame> run_near_far(const NearFarSpec& spec, const StreamView& stream);

/// Synchronous ensemble (every expert every frame) combined per spec.combine_mode.
std::vector<NearFarFrame> run_range_ensemble(const EnsembleSpec& spec, const StreamView& stream);

}  // namespace rangeforge
