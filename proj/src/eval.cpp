#include "rangeforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace rangeforge {

void MatchSpec::validate() const {
  if (thresholds.empty()) throw Error("eval.thresholds must not be empty");
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > 0.0)) throw Error("eval.thresholds must be positive");
    if (k > 0 && !(thresholds[k] > thresholds[k - 1])) throw Error("eval.thresholds must strictly increase");
  }
  if (!(tp_error_threshold > 0.0)) throw Error("eval.tp_error_threshold must be positive");
  if (ap_recall_points < 2) throw Error("eval.ap_recall_points must be >= 2");
  if (!(ate_normalizer > 0.0) || !(ase_normalizer > 0.0) || !(aoe_normalizer > 0.0) || !(ave_normalizer > 0.0)) {
    throw Error("eval normalizers must be positive");
  }
}

namespace {

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x() - b.center.x(), a.center.y() - b.center.y());
}

std::vector<std::size_t> ranking(std::span<const Box3D> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

Matching match_frame(std::span<const Box3D> dets, std::span<const Box3D> gts, double thresh) {
  Matching m;
  m.is_tp.assign(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d : ranking(dets)) {
    std::size_t best = gts.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[d].class_id) continue;
      const double dist = bev_distance(dets[d], gts[g]);
      if (dist <= thresh && dist < best_dist) {
        best = g;
        best_dist = dist;
      }
    }
    if (best < gts.size()) {
      taken[best] = true;
      m.is_tp[d] = true;
      m.pairs.emplace_back(d, best, best_dist);
    }
  }
  return m;
}

std::optional<double> average_precision(std::span<const ScoredFlag> ranked, std::size_t gt_count,
                                        int recall_points) {
  if (gt_count == 0) return std::nullopt;
  if (recall_points < 2) throw Error("average_precision: need at least two recall points");

  // Precision envelope: best precision at or beyond each cut.
  const std::size_t n = ranked.size();
  std::vector<std::size_t> tp_at(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += ranked[k].tp ? 1 : 0;
    tp_at[k] = tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  // Recall level j / (points - 1) is reached at cut k when
  // tp_at[k] * (points - 1) >= j * gt_count; compared in integers.
  const auto steps = static_cast<std::size_t>(recall_points - 1);
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j <= steps; ++j) {
    while (k < n && tp_at[k] * steps < j * gt_count) ++k;
    if (k == n) break;
    sum += precision[k];
  }
  return sum / static_cast<double>(recall_points);
}

double yaw_difference(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d;
}

double aligned_scale_error(const Eigen::Vector3d& det_dims, const Eigen::Vector3d& gt_dims) {
  // Co-centred, co-oriented boxes overlap in the per-axis minimum extents.
  const double inter = det_dims.cwiseMin(gt_dims).prod();
  return 1.0 - inter / (det_dims.prod() + gt_dims.prod() - inter);
}

TpErrors tp_errors(std::span<const std::pair<Box3D, Box3D>> pairs, const MatchSpec& spec) {
  TpErrors e;
  e.matches = pairs.size();
  if (pairs.empty()) {
    e.no_matches = true;
    e.ate = spec.ate_normalizer;
    e.ase = spec.ase_normalizer;
    e.aoe = spec.aoe_normalizer;
    e.ave = spec.ave_normalizer;
    return e;
  }
  for (const auto& [det, gt] : pairs) {
    e.ate += bev_distance(det, gt);
    e.ase += aligned_scale_error(det.dims, gt.dims);
    e.aoe += yaw_difference(det.yaw, gt.yaw);
    const Eigen::Vector2d dv = (det.has_velocity() ? det.velocity : Eigen::Vector2d::Zero()) -
                               (gt.has_velocity() ? gt.velocity : Eigen::Vector2d::Zero());
    e.ave += dv.norm();
  }
  const auto n = static_cast<double>(pairs.size());
  e.ate /= n;
  e.ase /= n;
  e.aoe /= n;
  e.ave /= n;
  return e;
}

double composite_score(double ap, const TpErrors& errors, CompositeMetric metric, const MatchSpec& spec) {
  const double t = 1.0 - std::min(errors.ate, spec.ate_normalizer) / spec.ate_normalizer;
  const double s = 1.0 - std::min(errors.ase, spec.ase_normalizer) / spec.ase_normalizer;
  const double o = 1.0 - std::min(errors.aoe, spec.aoe_normalizer) / spec.aoe_normalizer;
  if (metric == CompositeMetric::Cds) return ap * (t + s + o) / 3.0;
  const double v = 1.0 - std::min(errors.ave, spec.ave_normalizer) / spec.ave_normalizer;
  return (5.0 * ap + t + s + o + v) / 10.0;
}

namespace {

struct Task {
  std::size_t band;
  int class_id;
};

struct FrameSlice {
  std::vector<Box3D> dets;
  std::vector<Box3D> gts;
};

ClassEval evaluate_class(std::span<const FrameSlice> frames, int class_id, const MatchSpec& spec) {
  ClassEval ce;
  ce.class_id = class_id;
  for (const auto& f : frames) ce.support += f.gts.size();

  auto ranked_flags = [&](double thresh, std::vector<std::pair<Box3D, Box3D>>* pairs) {
    struct Entry {
      double score;
      std::size_t frame;
      std::size_t index;
      bool tp;
    };
    std::vector<Entry> entries;
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
      const Matching m = match_frame(frames[fi].dets, frames[fi].gts, thresh);
      for (std::size_t d = 0; d < frames[fi].dets.size(); ++d) {
        entries.push_back({frames[fi].dets[d].score, fi, d, m.is_tp[d]});
      }
      if (pairs) {
        for (const auto& [d, g, dist] : m.pairs) pairs->emplace_back(frames[fi].dets[d], frames[fi].gts[g]);
      }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.frame != b.frame) return a.frame < b.frame;
      return a.index < b.index;
    });
    std::vector<ScoredFlag> flags;
    flags.reserve(entries.size());
    for (const Entry& e : entries) flags.push_back({e.score, e.tp});
    return flags;
  };

  double ap_sum = 0.0;
  for (double thresh : spec.thresholds) {
    const auto flags = ranked_flags(thresh, nullptr);
    ap_sum += average_precision(flags, ce.support, spec.ap_recall_points).value_or(0.0);
  }
  ce.ap = ap_sum / static_cast<double>(spec.thresholds.size());

  std::vector<std::pair<Box3D, Box3D>> pairs;
  ranked_flags(spec.tp_error_threshold, &pairs);
  const TpErrors errors = tp_errors(pairs, spec);
  ce.ate = errors.ate;
  ce.ase = errors.ase;
  ce.aoe = errors.aoe;
  ce.ave = errors.ave;
  ce.true_positives = errors.matches;
  ce.no_matches = errors.no_matches;
  ce.cds = composite_score(ce.ap, errors, CompositeMetric::Cds, spec);
  ce.nds = composite_score(ce.ap, errors, CompositeMetric::Nds, spec);
  return ce;
}

ClassEval mean_over_classes(std::span<const ClassEval> classes) {
  ClassEval agg;
  agg.class_id = -1;
  if (classes.empty()) return agg;
  agg.no_matches = true;
  for (const ClassEval& c : classes) {
    agg.ap += c.ap;
    agg.ate += c.ate;
    agg.ase += c.ase;
    agg.aoe += c.aoe;
    agg.ave += c.ave;
    agg.cds += c.cds;
    agg.nds += c.nds;
    agg.support += c.support;
    agg.true_positives += c.true_positives;
    agg.no_matches = agg.no_matches && c.no_matches;
  }
  const auto n = static_cast<double>(classes.size());
  agg.ap /= n;
  agg.ate /= n;
  agg.ase /= n;
  agg.aoe /= n;
  agg.ave /= n;
  agg.cds /= n;
  agg.nds /= n;
  return agg;
}

}  // namespace

CohortReport evaluate_cohorts(std::span<const std::vector<Box3D>> dets_per_frame,
                              std::span<const std::vector<Box3D>> gts_per_frame, std::span<const RangeBand> bands,
                              const MatchSpec& spec) {
  spec.validate();
  if (dets_per_frame.size() != gts_per_frame.size()) throw Error("evaluate_cohorts: frame counts differ");
  if (bands.empty()) throw Error("evaluate_cohorts: no bands");

  std::vector<RangeBand> all_bands(bands.begin(), bands.end());
  if (bands.size() > 1) {
    double inner = bands.front().inner();
    double outer = bands.front().outer();
    for (const RangeBand& b : bands) {
      inner = std::min(inner, b.inner());
      outer = std::max(outer, b.outer());
    }
    all_bands.emplace_back(inner, outer);
  }

  // Per band: frames filtered to the band, and the classes present.
  std::vector<std::vector<FrameSlice>> banded(all_bands.size());
  std::vector<std::set<int>> gt_classes(all_bands.size());
  std::vector<std::set<int>> det_classes(all_bands.size());
  for (std::size_t b = 0; b < all_bands.size(); ++b) {
    banded[b].resize(dets_per_frame.size());
    for (std::size_t f = 0; f < dets_per_frame.size(); ++f) {
      banded[b][f].dets = filter_detections_by_band(dets_per_frame[f], all_bands[b], spec.range_mode);
      banded[b][f].gts = filter_detections_by_band(gts_per_frame[f], all_bands[b], spec.range_mode);
      for (const Box3D& g : banded[b][f].gts) gt_classes[b].insert(g.class_id);
      for (const Box3D& d : banded[b][f].dets) det_classes[b].insert(d.class_id);
    }
  }

  std::vector<Task> tasks;
  for (std::size_t b = 0; b < all_bands.size(); ++b) {
    for (int c : gt_classes[b]) tasks.push_back({b, c});
  }
  std::vector<ClassEval> results(tasks.size());
  const auto n_tasks = static_cast<std::int64_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < n_tasks; ++k) {
    const Task& task = tasks[k];
    std::vector<FrameSlice> slices(banded[task.band].size());
    for (std::size_t f = 0; f < slices.size(); ++f) {
      for (const Box3D& d : banded[task.band][f].dets) {
        if (d.class_id == task.class_id) slices[f].dets.push_back(d);
      }
      for (const Box3D& g : banded[task.band][f].gts) {
        if (g.class_id == task.class_id) slices[f].gts.push_back(g);
      }
    }
    results[k] = evaluate_class(slices, task.class_id, spec);
  }

  CohortReport report;
  std::size_t k = 0;
  for (std::size_t b = 0; b < all_bands.size(); ++b) {
    BandEval be;
    be.band = all_bands[b];
    for (int c : gt_classes[b]) be.classes.push_back(results[k++]);
    for (int c : det_classes[b]) {
      if (!gt_classes[b].contains(c)) be.excluded_classes.push_back(c);
    }
    be.has_support = !be.classes.empty();
    be.aggregate = mean_over_classes(be.classes);
    report.bands.push_back(std::move(be));
  }
  return report;
}

LatencyStats latency_stats(std::span<const StageTimings> frames) {
  if (frames.empty()) throw Error("latency_stats: no frames");
  LatencyStats s;
  s.frames = frames.size();
  const auto n = static_cast<double>(frames.size());
  for (const StageTimings& f : frames) {
    s.mean_ms += f.total();
    s.stage_means += f;
  }
  s.mean_ms /= n;
  s.stage_means.point_proc /= n;
  s.stage_means.backbone /= n;
  s.stage_means.neck /= n;
  s.stage_means.head /= n;
  s.stage_means.post_proc /= n;
  double var = 0.0;
  for (const StageTimings& f : frames) var += (f.total() - s.mean_ms) * (f.total() - s.mean_ms);
  s.std_ms = std::sqrt(var / n);
  return s;
}

}  // namespace rangeforge
