#include "rangeforge/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

namespace rangeforge {

namespace {

// Indices ordered by (score desc, index asc).
std::vector<std::size_t> score_order(std::span<const Box3D> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center.x() - b.center.x(), a.center.y() - b.center.y());
}

std::vector<Box3D> nms_greedy(std::span<const Box3D> dets, double thresh) {
  std::vector<Box3D> kept;
  for (std::size_t idx : score_order(dets)) {
    const Box3D& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Box3D& k) {
      return k.class_id == cand.class_id && bev_distance(k, cand) < thresh;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

std::vector<Box3D> nms_maxpool(std::span<const Box3D> dets, double thresh) {
  const double cell = thresh / 2.0;
  using Key = std::tuple<int, std::int64_t, std::int64_t>;
  auto key_of = [&](const Box3D& b) {
    return Key{b.class_id, static_cast<std::int64_t>(std::floor(b.center.x() / cell)),
               static_cast<std::int64_t>(std::floor(b.center.y() / cell))};
  };

  // Best-ranked box per occupied cell; rank = position in score order.
  const std::vector<std::size_t> order = score_order(dets);
  std::vector<std::size_t> rank(dets.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  std::map<Key, std::size_t> best;
  for (std::size_t idx = 0; idx < dets.size(); ++idx) {
    auto [it, inserted] = best.try_emplace(key_of(dets[idx]), idx);
    if (!inserted && rank[idx] < rank[it->second]) it->second = idx;
  }

  std::vector<Box3D> kept;
  for (std::size_t idx : order) {
    const auto [cls, ci, cj] = key_of(dets[idx]);
    bool is_max = true;
    for (std::int64_t di = -1; di <= 1 && is_max; ++di) {
      for (std::int64_t dj = -1; dj <= 1 && is_max; ++dj) {
        auto it = best.find(Key{cls, ci + di, cj + dj});
        if (it != best.end() && rank[it->second] < rank[idx]) is_max = false;
      }
    }
    if (is_max) kept.push_back(dets[idx]);
  }
  return kept;
}

}  // namespace

std::vector<Box3D> greedy_nms(std::span<const Box3D> dets, double dist_thresh, NmsMode mode) {
  if (!(dist_thresh > 0.0)) throw Error("greedy_nms: distance threshold must be positive");
  for (const Box3D& b : dets) {
    if (!(b.score >= 0.0 && b.score <= 1.0)) throw Error("greedy_nms: score outside [0, 1]");
  }
  return mode == NmsMode::Greedy ? nms_greedy(dets, dist_thresh) : nms_maxpool(dets, dist_thresh);
}

ForecastResult forecast_detections(std::span<const Box3D> dets, double dt, const Pose& pose_then,
                                   const Pose& pose_now) {
  if (!(dt > 0.0)) throw Error("forecast_detections: dt must be positive");
  ForecastResult out;
  out.boxes.reserve(dets.size());
  for (const Box3D& d : dets) {
    Box3D b = compensate_box(d, pose_then, pose_now);
    if (!b.has_velocity()) {
      ++out.missing_velocity;
      b.velocity = Eigen::Vector2d::Zero();
    }
    b.center.x() += b.velocity.x() * dt;
    b.center.y() += b.velocity.y() * dt;
    out.boxes.push_back(b);
  }
  return out;
}

void EnsembleSpec::validate() const {
  if (experts.empty()) throw Error("ensemble: no experts");
  if (!(nms_threshold > 0.0)) throw Error("ensemble: nms_threshold must be positive");
  for (const ExpertSlot& e : experts) e.config.validate();

  std::vector<RangeBand> bands;
  for (const ExpertSlot& e : experts) bands.push_back(e.band);
  std::sort(bands.begin(), bands.end(), [](const RangeBand& a, const RangeBand& b) { return a.inner() < b.inner(); });
  if (bands.front().inner() != 0.0) throw Error("ensemble: bands must start at 0 m");
  for (std::size_t k = 1; k < bands.size(); ++k) {
    if (bands[k].inner() < bands[k - 1].outer()) throw Error("ensemble: bands overlap");
    if (bands[k].inner() > bands[k - 1].outer()) throw Error("ensemble: bands leave a gap");
  }
}

void NearFarSpec::validate() const {
  ensemble.validate();
  if (ensemble.combine_mode != CombineMode::BandRoute) throw Error("near-far: combine mode must be band_route");
  if (frequencies.size() != ensemble.experts.size()) {
    throw Error("near-far: need one frequency per expert");
  }
  if (std::any_of(frequencies.begin(), frequencies.end(), [](int f) { return f < 1; })) {
    throw Error("near-far: frequencies must be >= 1");
  }
  std::size_t innermost = 0;
  for (std::size_t k = 1; k < ensemble.experts.size(); ++k) {
    if (ensemble.experts[k].band.inner() < ensemble.experts[innermost].band.inner()) innermost = k;
  }
  if (frequencies[innermost] != 1) throw Error("near-far: the near expert must run every frame");
}

std::vector<Box3D> combine_range_ensemble(const EnsembleSpec& spec,
                                          std::span<const std::vector<Box3D>> per_expert_dets) {
  if (per_expert_dets.size() != spec.experts.size()) {
    throw Error("combine_range_ensemble: detection lists do not match experts");
  }
  std::vector<Box3D> out;
  if (spec.combine_mode == CombineMode::BandRoute) {
    for (std::size_t i = 0; i < spec.experts.size(); ++i) {
      auto routed = filter_detections_by_band(per_expert_dets[i], spec.experts[i].band, spec.range_mode);
      out.insert(out.end(), routed.begin(), routed.end());
    }
    return out;
  }
  for (const auto& dets : per_expert_dets) out.insert(out.end(), dets.begin(), dets.end());
  return greedy_nms(out, spec.nms_threshold, NmsMode::Greedy);
}

PointCloud expert_input(const EnsembleSpec& spec, std::size_t expert, std::span<const Point> aggregated) {
  if (!spec.test_time_mask) return PointCloud(aggregated.begin(), aggregated.end());
  return donut_crop(aggregated, spec.experts.at(expert).band, spec.range_mode);
}

namespace {

struct LastActive {
  std::size_t frame;
  std::vector<Box3D> detections;
};

std::vector<NearFarFrame> run_schedule(const EnsembleSpec& spec, std::span<const int> frequencies,
                                       const StreamView& stream, std::span<const Detector* const> detectors) {
  const std::size_t n_experts = spec.experts.size();
  if (detectors.size() != n_experts) throw Error("run_near_far: need one detector per expert");
  if (stream.truth.size() != stream.sweeps.size()) throw Error("run_near_far: truth/sweep count mismatch");
  if (stream.sweeps_per_frame == 0) throw Error("run_near_far: sweeps_per_frame must be >= 1");

  std::vector<std::optional<LastActive>> last(n_experts);
  std::vector<NearFarFrame> frames;
  frames.reserve(stream.sweeps.size());

  for (std::size_t t = 0; t < stream.sweeps.size(); ++t) {
    if (t > 0 && !(stream.sweeps[t].timestamp > stream.sweeps[t - 1].timestamp)) {
      throw Error("run_near_far: stream must be time-ordered");
    }
    const PointCloud aggregated = aggregate_sweeps(stream.sweeps.first(t + 1), stream.sweeps_per_frame);
    NearFarFrame frame;
    frame.experts.resize(n_experts);

    const auto n = static_cast<std::int64_t>(n_experts);
    // Experts are independent within a frame; each writes only its own slot.
#pragma omp parallel for schedule(dynamic, 1) if (n > 1)
    for (std::int64_t i = 0; i < n; ++i) {
      ExpertFrameRecord& rec = frame.experts[i];
      if (t % static_cast<std::size_t>(frequencies[i]) != 0) continue;
      const RangeExpertConfig& cfg = spec.experts[i].config;
      const PointCloud input = expert_input(spec, static_cast<std::size_t>(i), aggregated);
      const SparsePillarGrid grid = voxelize_serial(input, cfg.infer_range, cfg.voxel_reciprocal);
      rec.ran = true;
      rec.timings = predict_latency(cfg.latency, grid);
      DetectorInput in{t, stream.truth[t], input, stream.annotation_range};
      rec.detections = detectors[i]->detect(in).detections;
    }

    for (std::size_t i = 0; i < n_experts; ++i) {
      ExpertFrameRecord& rec = frame.experts[i];
      if (rec.ran) {
        last[i] = LastActive{t, rec.detections};
        frame.timings += rec.timings;
        continue;
      }
      if (!last[i]) {
        rec.no_history = true;
        continue;
      }
      const std::size_t src = last[i]->frame;
      rec.source_age = t - src;
      ForecastResult fc = forecast_detections(last[i]->detections, stream.sweeps[t].timestamp - stream.sweeps[src].timestamp,
                                              stream.sweeps[src].ego_pose, stream.sweeps[t].ego_pose);
      rec.missing_velocity = fc.missing_velocity;
      rec.detections = std::move(fc.boxes);
    }

    std::vector<std::vector<Box3D>> per_expert;
    per_expert.reserve(n_experts);
    for (const auto& rec : frame.experts) per_expert.push_back(rec.detections);
    frame.detections = combine_range_ensemble(spec, per_expert);
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<std::unique_ptr<Detector>> oracle_detectors(const EnsembleSpec& spec) {
  std::vector<std::unique_ptr<Detector>> owned;
  for (const ExpertSlot& e : spec.experts) owned.push_back(std::make_unique<OracleDetector>(e.config));
  return owned;
}

std::vector<const Detector*> views(const std::vector<std::unique_ptr<Detector>>& owned) {
  std::vector<const Detector*> out;
  for (const auto& d : owned) out.push_back(d.get());
  return out;
}

}  // namespace

std::vector<NearFarFrame> run_near_far(const NearFarSpec& spec, const StreamView& stream,
                                       std::span<const Detector* const> detectors) {
  spec.validate();
  return run_schedule(spec.ensemble, spec.frequencies, stream, detectors);
}

std::vector<NearFarFrame> run_near_far(const NearFarSpec& spec, const StreamView& stream) {
  spec.validate();
  const auto owned = oracle_detectors(spec.ensemble);
  const auto ptrs = views(owned);
  return run_schedule(spec.ensemble, spec.frequencies, stream, ptrs);
}

std::vector<NearFarFrame> run_range_ensemble(const EnsembleSpec& spec, const StreamView& stream) {
  spec.validate();
  const auto owned = oracle_detectors(spec);
  const auto ptrs = views(owned);
  const std::vector<int> every_frame(spec.experts.size(), 1);
  return run_schedule(spec, every_frame, stream, ptrs);
}

}  // namespace rangeforge
