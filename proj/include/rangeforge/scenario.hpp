#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rangeforge/geometry.hpp"

namespace rangeforge {

enum class EgoMotionKind { Static, ConstantVelocity, Waypoints };

struct Waypoint {
  double time = 0.0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct EgoMotion {
  EgoMotionKind kind = EgoMotionKind::ConstantVelocity;
  Eigen::Vector2d velocity = Eigen::Vector2d(10.0, 0.0);  // world frame, m/s
  double yaw = 0.0;  // fixed heading for Static / ConstantVelocity
  std::vector<Waypoint> waypoints;  // sorted by time; linear interpolation, clamped

  /// Ego -> world pose at `time`.
  Pose pose_at(double time) const;
};

struct ObjectClassSpec {
  int class_id = 0;
  double weight = 1.0;
  Eigen::Vector3d dims = Eigen::Vector3d(4.6, 1.9, 1.7);
  double max_speed = 15.0;  // m/s
};

enum class SpawnDistribution { UniformRadius, UniformArea };

struct ScenarioSpec {
  std::size_t n_frames = 20;
  double frame_dt = 0.5;  // s
  EgoMotion ego;
  std::size_t n_objects = 60;
  std::vector<ObjectClassSpec> classes = {
      {0, 0.6, Eigen::Vector3d(4.6, 1.9, 1.7), 15.0},
      {1, 0.25, Eigen::Vector3d(0.8, 0.8, 1.8), 2.0},
      {2, 0.15, Eigen::Vector3d(11.0, 2.9, 3.4), 10.0},
  };
  double min_spawn_range = 5.0;
  double max_range = 150.0;  // spawn and annotation envelope, m
  SpawnDistribution spawn = SpawnDistribution::UniformRadius;
  /// Expected points per object per sweep is object_points_k / range^2.
  double object_points_k = 10000.0;
  /// Ground returns with areal density ground_k / max(range, 1)^2 per m^2.
  double ground_k = 400.0;
  /// Uniform clutter, points per m^2 over the max_range disk.
  double clutter_density = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// World-frame object track moving at constant velocity.
struct ObjectTrack {
  std::int64_t id = 0;
  int class_id = 0;
  Eigen::Vector3d dims;
  Eigen::Vector3d start_center;  // world, at time 0
  Eigen::Vector2d velocity;      // world, m/s
  double yaw = 0.0;              // world heading

  Eigen::Vector3d center_at(double time) const;
};

struct Scenario {
  std::vector<Sweep> sweeps;
  std::vector<std::vector<Box3D>> truth;  // per sweep, ego frame
  std::vector<ObjectTrack> tracks;
  double annotation_range = 150.0;
};

/// Ground-truth boxes of every track within the annotation range, expressed in
/// the ego frame given by `ego_pose`.
std::vector<Box3D> truth_at(std::span<const ObjectTrack> tracks, double time, const Pose& ego_pose,
                            double annotation_range);

/// Deterministic in `spec.seed`.
Scenario generate_scenario(const ScenarioSpec& spec);

}  // namespace rangeforge
