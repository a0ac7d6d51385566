#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rangeforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalizes an angle into (-pi, pi].
double normalize_yaw(double yaw);

/// Rigid SE(3) transform: x_dst = R * x_src + t.
///
/// Rotation is stored as a unit quaternion. The constructor renormalizes and
/// rejects non-finite or zero-norm input, so every Pose in circulation is
/// valid.
class Pose {
 public:
  Pose();
  Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return Pose(); }
  /// Planar pose: rotation about +z by `yaw`.
  static Pose from_yaw(double yaw, const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }

  /// Heading of the rotated x axis projected on the ground plane.
  double yaw() const;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const;

  Pose inverse() const;

  /// (this * other)(x) = this(other(x)).
  Pose operator*(const Pose& other) const;

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

Pose compose(const Pose& outer, const Pose& inner);
Pose invert_pose(const Pose& pose);

/// Rotation angle (radians, in [0, pi]) between two poses' rotations.
double rotation_distance(const Pose& a, const Pose& b);

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
  /// Seconds relative to the timestamp of the frame the point is expressed in.
  double dt = 0.0;

  Eigen::Vector3d xyz() const { return {x, y, z}; }
  bool operator==(const Point&) const = default;
};

using PointCloud = std::vector<Point>;

struct Sweep {
  double timestamp = 0.0;
  Pose ego_pose;  // ego -> world
  PointCloud points;  // ego frame of this sweep
};

/// Detection or annotation cuboid.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d dims = Eigen::Vector3d::Ones();  // length, width, height
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // BEV, m/s; NaN = unknown
  int class_id = 0;
  double score = 1.0;
  /// Object identity carried from ground truth; -1 when there is none.
  std::int64_t track_id = -1;

  bool has_velocity() const { return velocity.allFinite(); }
  bool operator==(const Box3D&) const = default;
};

/// Throws if dims, score, yaw or center violate the Box3D invariants.
void validate_box(const Box3D& box);

Point apply_pose(const Pose& pose, const Point& p);

/// Union of the last `k` sweeps re-expressed in the ego frame of the newest
/// sweep. Uses every sweep when fewer than `k` are available.
PointCloud aggregate_sweeps(std::span<const Sweep> sweeps, std::size_t k);

/// Re-expresses a box given in the ego frame of `pose_src` in the ego frame of
/// `pose_dst`. Velocity is rotated by the relative rotation.
Box3D compensate_box(const Box3D& box, const Pose& pose_src, const Pose& pose_dst);

}  // namespace rangeforge
