#include "rangeforge/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace rangeforge {

namespace {

bool non_negative(double v) { return v >= 0.0 && std::isfinite(v); }

bool probability(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void OracleParams::validate() const {
  if (!probability(base_recall)) throw Error("oracle.base_recall must be in [0, 1]");
  if (!non_negative(density_floor) || !non_negative(recall_decay) || !non_negative(sigma_t0) ||
      !non_negative(sigma_t_slope) || !non_negative(sigma_t_voxel) || !non_negative(yaw_sigma) ||
      !non_negative(fp_rate)) {
    throw Error("oracle rates and sigmas must be finite and >= 0");
  }
}

void LatencyParams::validate() const {
  if (!non_negative(c_point_per_kvoxel) || !non_negative(c_backbone_per_Mcell) ||
      !non_negative(c_neck_per_Mcell) || !non_negative(c_head) || !non_negative(c_post)) {
    throw Error("latency coefficients must be finite and >= 0");
  }
}

StageTimings& StageTimings::operator+=(const StageTimings& o) {
  point_proc += o.point_proc;
  backbone += o.backbone;
  neck += o.neck;
  head += o.head;
  post_proc += o.post_proc;
  return *this;
}

void RangeExpertConfig::validate() const {
  if (!(train_range > 0.0) || !(voxel_reciprocal > 0.0) || !(infer_range > 0.0) ||
      !std::isfinite(train_range) || !std::isfinite(voxel_reciprocal) || !std::isfinite(infer_range)) {
    throw Error("expert '" + name + "': ranges and voxel reciprocal must be positive and finite");
  }
  oracle.validate();
  latency.validate();
}

std::string RangeExpertConfig::label() const {
  std::ostringstream os;
  os << train_range << '/' << voxel_reciprocal << " -> " << infer_range;
  return os.str();
}

LatencyParams anchor_latency(const StageTimings& timings, double side, double occupied) {
  if (!(side > 0.0) || !(occupied > 0.0)) throw Error("anchor_latency: side and occupancy must be positive");
  const double mcells = side * side / 1e6;
  LatencyParams p;
  p.c_point_per_kvoxel = timings.point_proc / (occupied / 1000.0);
  p.c_backbone_per_Mcell = timings.backbone / mcells;
  p.c_neck_per_Mcell = timings.neck / mcells;
  p.c_head = timings.head;
  p.c_post = timings.post_proc;
  return p;
}

namespace {

// Reference timings are the 50 m rows of the published runtime breakdown.
// Nominal occupancies are this project's assumption for a 5-sweep aggregate
// cropped to 50 m.
DetectorProfile make_profile(std::string name, GeneralizationMode mode, ScoreCalibration calibration,
                             double sigma_slope, double ref_s, double ref_occupied, StageTimings timings) {
  DetectorProfile p;
  p.name = std::move(name);
  p.generalization_mode = mode;
  p.oracle.score_calibration = calibration;
  p.oracle.sigma_t_slope = sigma_slope;
  p.reference_range = 50.0;
  p.reference_voxel_reciprocal = ref_s;
  p.reference_occupied = ref_occupied;
  p.reference_timings = timings;
  p.latency = anchor_latency(timings, static_cast<double>(grid_side(50.0, ref_s)), ref_occupied);
  return p;
}

}  // namespace

const std::vector<DetectorProfile>& detector_profiles() {
  static const std::vector<DetectorProfile> profiles = {
      make_profile("pointpillars-like", GeneralizationMode::LocalCalibrated, ScoreCalibration::Calibrated,
                   0.002, 4.0, 16000.0, {10.5, 3.5, 1.9, 1.2, 58.2}),
      make_profile("cbgs-like", GeneralizationMode::GlobalOverconfident, ScoreCalibration::OverconfidentFar,
                   0.004, 12.5, 40000.0, {43.6, 4.7, 2.5, 1.2, 55.9}),
      make_profile("centerpoint-like", GeneralizationMode::SoftTarget, ScoreCalibration::Calibrated, 0.002,
                   12.5, 40000.0, {45.8, 2.7, 0.8, 42.8, 440.9}),
      make_profile("transfusion-like", GeneralizationMode::AbsolutePeCollapse,
                   ScoreCalibration::ZeroOutsideTrain, 0.002, 12.5, 40000.0, {264.9, 4.5, 1.3, 9.8, 1.5}),
  };
  return profiles;
}

const DetectorProfile& detector_profile(const std::string& name) {
  for (const auto& p : detector_profiles()) {
    if (p.name == name) return p;
  }
  throw Error("unknown detector profile '" + name + "'");
}

StageTimings predict_latency(const LatencyParams& params, double side, double occupied) {
  const double mcells = side * side / 1e6;
  return StageTimings{params.c_point_per_kvoxel * occupied / 1000.0, params.c_backbone_per_Mcell * mcells,
                      params.c_neck_per_Mcell * mcells, params.c_head, params.c_post};
}

StageTimings predict_latency(const LatencyParams& params, const SparsePillarGrid& grid) {
  return predict_latency(params, static_cast<double>(grid.side), static_cast<double>(grid.occupied()));
}

namespace {

// Least squares through the origin: argmin_c sum (c x - y)^2.
double fit_through_origin(std::span<const double> x, std::span<const double> y) {
  double xy = 0.0;
  double xx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    xy += x[k] * y[k];
    xx += x[k] * x[k];
  }
  return xx > 0.0 ? xy / xx : 0.0;
}

double relative(double predicted, double measured) {
  return measured != 0.0 ? (predicted - measured) / measured : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

CalibrationResult calibrate_latency(std::span<const TimingRow> rows) {
  if (rows.size() < 2) throw Error("calibrate_latency: need at least two rows");

  std::vector<double> cells, kvox, point, backbone, neck;
  double head = 0.0;
  double post = 0.0;
  for (const TimingRow& r : rows) {
    const auto side = static_cast<double>(grid_side(r.range, r.voxel_reciprocal));
    if (!non_negative(r.occupied)) throw Error("calibrate_latency: occupancy must be >= 0");
    cells.push_back(side * side / 1e6);
    kvox.push_back(r.occupied / 1000.0);
    point.push_back(r.measured.point_proc);
    backbone.push_back(r.measured.backbone);
    neck.push_back(r.measured.neck);
    head += r.measured.head;
    post += r.measured.post_proc;
  }
  if (std::all_of(cells.begin(), cells.end(), [&](double c) { return c == cells.front(); })) {
    throw Error("calibrate_latency: degenerate design, all rows share one grid area");
  }

  CalibrationResult result;
  LatencyParams& p = result.params;
  p.c_point_per_kvoxel = fit_through_origin(kvox, point);
  p.c_backbone_per_Mcell = fit_through_origin(cells, backbone);
  p.c_neck_per_Mcell = fit_through_origin(cells, neck);
  p.c_head = head / static_cast<double>(rows.size());
  p.c_post = post / static_cast<double>(rows.size());
  p.validate();

  for (const TimingRow& r : rows) {
    const StageTimings pred =
        predict_latency(p, static_cast<double>(grid_side(r.range, r.voxel_reciprocal)), r.occupied);
    result.relative_residuals.push_back({relative(pred.point_proc, r.measured.point_proc),
                                         relative(pred.backbone, r.measured.backbone),
                                         relative(pred.neck, r.measured.neck),
                                         relative(pred.head, r.measured.head),
                                         relative(pred.post_proc, r.measured.post_proc)});
  }
  return result;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

bool inside_footprint(const Box3D& box, double c, double s, const Point& p) {
  const double dx = p.x - box.center.x();
  const double dy = p.y - box.center.y();
  const double along = dx * c + dy * s;
  const double across = -dx * s + dy * c;
  return std::abs(along) <= 0.5 * box.dims.x() && std::abs(across) <= 0.5 * box.dims.y();
}

std::uint32_t count_in_box(const Box3D& box, std::span<const Point> cloud) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double reach = 0.5 * std::hypot(box.dims.x(), box.dims.y());
  std::uint32_t n = 0;
  for (const Point& p : cloud) {
    if (std::abs(p.x - box.center.x()) > reach || std::abs(p.y - box.center.y()) > reach) continue;
    if (inside_footprint(box, c, s, p)) ++n;
  }
  return n;
}

}  // namespace

std::vector<std::uint32_t> points_in_boxes_serial(std::span<const Box3D> boxes, std::span<const Point> cloud) {
  std::vector<std::uint32_t> counts(boxes.size(), 0);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const double c = std::cos(boxes[b].yaw);
    const double s = std::sin(boxes[b].yaw);
    for (const Point& p : cloud) {
      if (inside_footprint(boxes[b], c, s, p)) ++counts[b];
    }
  }
  return counts;
}

std::vector<std::uint32_t> points_in_boxes_parallel(std::span<const Box3D> boxes, std::span<const Point> cloud) {
  std::vector<std::uint32_t> counts(boxes.size(), 0);
  const auto n = static_cast<std::int64_t>(boxes.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t b = 0; b < n; ++b) counts[b] = count_in_box(boxes[b], cloud);
  return counts;
}

OracleDetector::OracleDetector(RangeExpertConfig config) : config_(std::move(config)) { config_.validate(); }

namespace {

double calibrated_score(double p_detect, double range, double infer_range) {
  return std::clamp(p_detect * (1.0 - range / (2.0 * infer_range)), 0.0, 1.0);
}

constexpr double kCollapseProbability = 0.98;
constexpr std::uint64_t kFrameStreamTag = 0x6672616d65ULL;

}  // namespace

DetectorOutput oracle_detect(const RangeExpertConfig& config, const DetectorInput& input) {
  config.validate();
  const OracleParams& op = config.oracle;
  const double r1 = config.train_range;
  const double r2 = config.infer_range;

  DetectorOutput out;
  out.beyond_annotation_range = r2 > input.annotation_range;

  const std::uint64_t frame_seed = mix_seed(op.seed, input.frame_index);
  std::mt19937_64 frame_rng(mix_seed(frame_seed, kFrameStreamTag));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (config.generalization_mode == GeneralizationMode::AbsolutePeCollapse && r2 != r1 &&
      unit(frame_rng) < kCollapseProbability) {
    return out;
  }

  const std::vector<std::uint32_t> counts = points_in_boxes_parallel(input.truth, input.cloud);
  const double voxel_edge = 1.0 / config.voxel_reciprocal;

  for (std::size_t k = 0; k < input.truth.size(); ++k) {
    const Box3D& gt = input.truth[k];
    const double range = radial_range(gt.center, RangeMode::BevL2);
    if (!(range < r2)) continue;

    // Per-object stream: an object's outcome does not depend on which other
    // objects are in view.
    const std::uint64_t key = gt.track_id >= 0 ? static_cast<std::uint64_t>(gt.track_id) : (1ULL << 62) + k;
    std::mt19937_64 rng(mix_seed(frame_seed, key));
    const double u_detect = unit(rng);
    const double nx = gauss(rng);
    const double ny = gauss(rng);
    const double nyaw = gauss(rng);
    const double u_score = unit(rng);

    double density = 1.0;
    if (op.density_floor > 0.0) density = std::min(1.0, counts[k] / op.density_floor);
    const double p_detect = op.base_recall * std::pow(density, op.recall_decay);
    if (!(u_detect < p_detect)) continue;

    const double sigma = op.sigma_t0 + op.sigma_t_slope * range + op.sigma_t_voxel * voxel_edge;
    Box3D det = gt;
    det.center.x() += sigma * nx;
    det.center.y() += sigma * ny;
    det.yaw = normalize_yaw(gt.yaw + op.yaw_sigma * nyaw);

    switch (op.score_calibration) {
      case ScoreCalibration::Calibrated:
        det.score = calibrated_score(p_detect, range, r2);
        break;
      case ScoreCalibration::OverconfidentFar:
        det.score = 0.5 + 0.5 * u_score;
        break;
      case ScoreCalibration::ZeroOutsideTrain:
        det.score = range > r1 ? 0.05 * u_score : calibrated_score(p_detect, range, r2);
        break;
    }
    out.detections.push_back(det);
  }

  if (op.fp_rate > 0.0) {
    std::poisson_distribution<int> n_fp(op.fp_rate);
    const int n = n_fp(frame_rng);
    for (int f = 0; f < n; ++f) {
      Box3D fp;
      const double radius = r2 * std::sqrt(unit(frame_rng));
      const double theta = 2.0 * std::numbers::pi * unit(frame_rng);
      fp.center = Eigen::Vector3d(radius * std::cos(theta), radius * std::sin(theta), 0.8);
      fp.yaw = normalize_yaw(2.0 * std::numbers::pi * unit(frame_rng) - std::numbers::pi);
      const double u_class = unit(frame_rng);
      if (!input.truth.empty()) {
        const auto pick = std::min(input.truth.size() - 1, static_cast<std::size_t>(u_class * input.truth.size()));
        fp.class_id = input.truth[pick].class_id;
        fp.dims = input.truth[pick].dims;
        fp.center.z() = input.truth[pick].center.z();
      } else {
        fp.dims = Eigen::Vector3d(4.5, 1.9, 1.6);
      }
      fp.velocity = Eigen::Vector2d::Zero();
      fp.score = 0.3 * unit(frame_rng);
      fp.track_id = -1;
      out.detections.push_back(fp);
    }
  }
  return out;
}

}  // namespace rangeforge
