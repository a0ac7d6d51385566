#include "rangeforge/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rangeforge/detector.hpp"
#include "rangeforge/range_ops.hpp"

namespace rangeforge {

Pose EgoMotion::pose_at(double time) const {
  switch (kind) {
    case EgoMotionKind::Static:
      return Pose::from_yaw(yaw);
    case EgoMotionKind::ConstantVelocity:
      return Pose::from_yaw(yaw, Eigen::Vector3d(velocity.x() * time, velocity.y() * time, 0.0));
    case EgoMotionKind::Waypoints:
      break;
  }
  if (waypoints.empty()) throw Error("ego waypoints: empty list");
  if (time <= waypoints.front().time) {
    const Waypoint& w = waypoints.front();
    return Pose::from_yaw(w.yaw, Eigen::Vector3d(w.x, w.y, 0.0));
  }
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    const Waypoint& a = waypoints[k - 1];
    const Waypoint& b = waypoints[k];
    if (time <= b.time) {
      const double u = (time - a.time) / (b.time - a.time);
      const double dyaw = normalize_yaw(b.yaw - a.yaw);
      return Pose::from_yaw(a.yaw + u * dyaw, Eigen::Vector3d(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), 0.0));
    }
  }
  const Waypoint& w = waypoints.back();
  return Pose::from_yaw(w.yaw, Eigen::Vector3d(w.x, w.y, 0.0));
}

void ScenarioSpec::validate() const {
  if (n_frames < 1) throw Error("scenario.n_frames must be >= 1");
  if (!(frame_dt > 0.0)) throw Error("scenario.frame_dt must be positive");
  if (!(max_range > 0.0)) throw Error("scenario.max_range must be positive");
  if (!(min_spawn_range >= 0.0) || !(min_spawn_range < max_range)) {
    throw Error("scenario.min_spawn_range must be in [0, max_range)");
  }
  if (!(object_points_k >= 0.0) || !(ground_k >= 0.0) || !(clutter_density >= 0.0)) {
    throw Error("scenario densities must be >= 0");
  }
  if (n_objects > 0 && classes.empty()) throw Error("scenario.classes must not be empty");
  double total_weight = 0.0;
  for (const auto& c : classes) {
    if (!(c.weight >= 0.0) || !(c.max_speed >= 0.0) || !(c.dims.array() > 0.0).all()) {
      throw Error("scenario.classes: weights and speeds must be >= 0, dims > 0");
    }
    total_weight += c.weight;
  }
  if (n_objects > 0 && !(total_weight > 0.0)) throw Error("scenario.classes: total weight must be positive");
  if (ego.kind == EgoMotionKind::Waypoints) {
    if (ego.waypoints.empty()) throw Error("scenario.ego.waypoints must not be empty");
    for (std::size_t k = 1; k < ego.waypoints.size(); ++k) {
      if (!(ego.waypoints[k].time > ego.waypoints[k - 1].time)) {
        throw Error("scenario.ego.waypoints times must strictly increase");
      }
    }
  }
}

Eigen::Vector3d ObjectTrack::center_at(double time) const {
  return start_center + Eigen::Vector3d(velocity.x() * time, velocity.y() * time, 0.0);
}

std::vector<Box3D> truth_at(std::span<const ObjectTrack> tracks, double time, const Pose& ego_pose,
                            double annotation_range) {
  const Pose world_to_ego = ego_pose.inverse();
  std::vector<Box3D> out;
  for (const ObjectTrack& t : tracks) {
    Box3D b;
    b.center = world_to_ego.apply(t.center_at(time));
    if (!(radial_range(b.center, RangeMode::BevL2) < annotation_range)) continue;
    const Eigen::Vector3d heading = world_to_ego.rotate(Eigen::Vector3d(std::cos(t.yaw), std::sin(t.yaw), 0.0));
    b.yaw = normalize_yaw(std::atan2(heading.y(), heading.x()));
    b.velocity = world_to_ego.rotate(Eigen::Vector3d(t.velocity.x(), t.velocity.y(), 0.0)).head<2>();
    b.dims = t.dims;
    b.class_id = t.class_id;
    b.score = 1.0;
    b.track_id = t.id;
    out.push_back(b);
  }
  return out;
}

namespace {

constexpr std::uint64_t kTrackTag = 0x747261636bULL;
constexpr std::uint64_t kSweepTag = 0x7377656570ULL;

std::vector<ObjectTrack> spawn_tracks(const ScenarioSpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, kTrackTag));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> weights;
  for (const auto& c : spec.classes) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

  const Pose ego0 = spec.ego.pose_at(0.0);
  std::vector<ObjectTrack> tracks;
  tracks.reserve(spec.n_objects);
  for (std::size_t k = 0; k < spec.n_objects; ++k) {
    const ObjectClassSpec& cls = spec.classes[pick(rng)];
    const double u = unit(rng);
    double range = 0.0;
    if (spec.spawn == SpawnDistribution::UniformRadius) {
      range = spec.min_spawn_range + u * (spec.max_range - spec.min_spawn_range);
    } else {
      const double a = spec.min_spawn_range * spec.min_spawn_range;
      const double b = spec.max_range * spec.max_range;
      range = std::sqrt(a + u * (b - a));
    }
    const double bearing = 2.0 * std::numbers::pi * unit(rng);
    const double heading = 2.0 * std::numbers::pi * unit(rng) - std::numbers::pi;
    const double speed = std::min(cls.max_speed, cls.max_speed * unit(rng));

    ObjectTrack t;
    t.id = static_cast<std::int64_t>(k);
    t.class_id = cls.class_id;
    t.dims = cls.dims;
    t.start_center = ego0.apply(Eigen::Vector3d(range * std::cos(bearing), range * std::sin(bearing), 0.5 * cls.dims.z()));
    t.velocity = speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    t.yaw = normalize_yaw(heading + ego0.yaw());
    t.velocity = Eigen::Rotation2Dd(ego0.yaw()) * t.velocity;
    tracks.push_back(t);
  }
  return tracks;
}

void sample_object_points(const Box3D& box, double k, std::mt19937_64& rng, PointCloud& out) {
  const double range = std::max(1.0, radial_range(box.center, RangeMode::BevL2));
  const double expected = k / (range * range);
  if (!(expected > 0.0)) return;
  std::poisson_distribution<int> count(expected);
  std::uniform_real_distribution<double> sym(-0.5, 0.5);
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  // Shrunk slightly so every return is strictly inside the footprint.
  constexpr double kShrink = 0.95;
  const int n = count(rng);
  for (int p = 0; p < n; ++p) {
    const double a = sym(rng) * kShrink * box.dims.x();
    const double b = sym(rng) * kShrink * box.dims.y();
    const double h = sym(rng) * kShrink * box.dims.z();
    out.push_back(Point{box.center.x() + a * c - b * s, box.center.y() + a * s + b * c, box.center.z() + h, 0.5, 0.0});
  }
}

void sample_ground(double ground_k, double max_range, std::mt19937_64& rng, PointCloud& out) {
  if (!(ground_k > 0.0)) return;
  // Density ground_k / max(r, 1)^2: a unit disk at constant density plus a
  // log-uniform radial law beyond 1 m.
  const double log_r = std::log(std::max(1.0, max_range));
  const double inner_mass = 0.5 * std::min(1.0, max_range * max_range);
  const double expected = 2.0 * std::numbers::pi * ground_k * (inner_mass + log_r);
  std::poisson_distribution<long> count(expected);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long n = count(rng);
  for (long p = 0; p < n; ++p) {
    const double u = unit(rng);
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    const double v = unit(rng);
    double r = 0.0;
    if (u * (inner_mass + log_r) < inner_mass) {
      r = std::min(1.0, max_range) * std::sqrt(v);
    } else {
      r = std::exp(v * log_r);
    }
    out.push_back(Point{r * std::cos(theta), r * std::sin(theta), 0.0, 0.1, 0.0});
  }
}

void sample_clutter(double density, double max_range, std::mt19937_64& rng, PointCloud& out) {
  if (!(density > 0.0)) return;
  std::poisson_distribution<long> count(density * std::numbers::pi * max_range * max_range);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long n = count(rng);
  for (long p = 0; p < n; ++p) {
    const double r = max_range * std::sqrt(unit(rng));
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    out.push_back(Point{r * std::cos(theta), r * std::sin(theta), 2.0 * unit(rng), 0.3, 0.0});
  }
}

}  // namespace

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario sc;
  sc.annotation_range = spec.max_range;
  sc.tracks = spawn_tracks(spec);

  for (std::size_t f = 0; f < spec.n_frames; ++f) {
    const double time = static_cast<double>(f) * spec.frame_dt;
    Sweep sweep;
    sweep.timestamp = time;
    sweep.ego_pose = spec.ego.pose_at(time);

    // Returns are sampled for every track within the sensor envelope, not just
    // the annotated ones.
    std::mt19937_64 rng(mix_seed(mix_seed(spec.seed, kSweepTag), f));
    const std::vector<Box3D> visible = truth_at(sc.tracks, time, sweep.ego_pose, spec.max_range);
    for (const Box3D& b : visible) sample_object_points(b, spec.object_points_k, rng, sweep.points);
    sample_ground(spec.ground_k, spec.max_range, rng, sweep.points);
    sample_clutter(spec.clutter_density, spec.max_range, rng, sweep.points);

    sc.truth.push_back(visible);
    sc.sweeps.push_back(std::move(sweep));
  }
  return sc;
}

}  // namespace rangeforge
