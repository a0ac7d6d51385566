#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rangeforge/detector.hpp"
#include "rangeforge/geometry.hpp"
#include "rangeforge/range_ops.hpp"

namespace rangeforge {

/// Matching and scoring configuration.
struct MatchSpec {
  std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};  // BEV center distance, m
  double tp_error_threshold = 2.0;  // matches used for ATE/ASE/AOE/AVE
  int ap_recall_points = 101;
  double ate_normalizer = 2.0;       // m
  double ase_normalizer = 1.0;
  double aoe_normalizer = 3.141592653589793;  // rad
  double ave_normalizer = 2.0;       // m/s, NDS only
  RangeMode range_mode = RangeMode::BevL2;

  void validate() const;
};

struct Matching {
  std::vector<bool> is_tp;  // per detection, input order
  /// (detection index, gt index, BEV distance) for each TP.
  std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
};

/// Greedy by (score desc, index asc): each detection takes the nearest
/// unmatched GT of its class within `thresh`.
Matching match_frame(std::span<const Box3D> dets, std::span<const Box3D> gts, double thresh);

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

/// Interpolated AP over `recall_points` evenly spaced recalls in [0, 1].
/// Flags must already be in ranking order (score desc, stable key).
/// Returns nullopt when gt_count == 0.
std::optional<double> average_precision(std::span<const ScoredFlag> ranked, std::size_t gt_count,
                                        int recall_points = 101);

struct TpErrors {
  double ate = 0.0;
  double ase = 0.0;
  double aoe = 0.0;
  double ave = 0.0;
  std::size_t matches = 0;
  bool no_matches = false;
};

/// Smallest absolute yaw difference, in [0, pi].
double yaw_difference(double a, double b);
/// 1 - IoU of two boxes after aligning centers and orientation.
double aligned_scale_error(const Eigen::Vector3d& det_dims, const Eigen::Vector3d& gt_dims);

/// Mean errors over matched (detection, gt) pairs. With no pairs every error
/// is set to its normalizer so it scores as maximal.
TpErrors tp_errors(std::span<const std::pair<Box3D, Box3D>> pairs, const MatchSpec& spec = {});

enum class CompositeMetric { Cds, Nds };

double composite_score(double ap, const TpErrors& errors, CompositeMetric metric, const MatchSpec& spec = {});

struct ClassEval {
  int class_id = 0;
  double ap = 0.0;
  double ate = 0.0;
  double ase = 0.0;
  double aoe = 0.0;
  double ave = 0.0;
  double cds = 0.0;
  double nds = 0.0;
  std::size_t support = 0;
  std::size_t true_positives = 0;  // at the TP-error threshold
  bool no_matches = false;

  bool operator==(const ClassEval&) const = default;
};

struct BandEval {
  RangeBand band = RangeBand::everything();
  std::vector<ClassEval> classes;  // classes with support > 0, by class id
  std::vector<int> excluded_classes;  // detected but without GT support
  /// Mean over supported classes; class_id = -1, support = total GT.
  ClassEval aggregate;
  bool has_support = false;

  bool operator==(const BandEval&) const = default;
};

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  StageTimings stage_means;
  std::size_t frames = 0;

  bool operator==(const LatencyStats&) const = default;
};

struct CohortReport {
  std::string method;
  std::vector<BandEval> bands;  // requested bands, then the full-range union
  std::optional<LatencyStats> latency;

  bool operator==(const CohortReport&) const = default;
};

/// Per-band evaluation. Detections and GTs are both filtered to each band
/// before matching. With more than one band the union band is appended.
CohortReport evaluate_cohorts(std::span<const std::vector<Box3D>> dets_per_frame,
                              std::span<const std::vector<Box3D>> gts_per_frame, std::span<const RangeBand> bands,
                              const MatchSpec& spec = {});

/// Mean and population standard deviation of per-frame totals.
LatencyStats latency_stats(std::span<const StageTimings> frames);

}  // namespace rangeforge
