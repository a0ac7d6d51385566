#include "rangeforge/geometry.hpp"

#include <cmath>
#include <numbers>

namespace rangeforge {

double normalize_yaw(double yaw) {
  if (!std::isfinite(yaw)) throw Error("normalize_yaw: non-finite angle");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(yaw, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Pose::Pose() : rotation_(Eigen::Quaterniond::Identity()), translation_(Eigen::Vector3d::Zero()) {}

Pose::Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.coeffs().allFinite() || !translation_.allFinite()) {
    throw Error("Pose: non-finite rotation or translation");
  }
  const double n = rotation_.norm();
  if (n < 1e-12) throw Error("Pose: zero-norm quaternion");
  rotation_.coeffs() /= n;
}

Pose Pose::from_yaw(double yaw, const Eigen::Vector3d& translation) {
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), translation);
}

double Pose::yaw() const {
  const Eigen::Vector3d heading = rotation_ * Eigen::Vector3d::UnitX();
  return std::atan2(heading.y(), heading.x());
}

Eigen::Vector3d Pose::apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

Eigen::Vector3d Pose::rotate(const Eigen::Vector3d& v) const { return rotation_ * v; }

Pose Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Pose(inv, -(inv * translation_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Pose compose(const Pose& outer, const Pose& inner) { return outer * inner; }

Pose invert_pose(const Pose& pose) { return pose.inverse(); }

double rotation_distance(const Pose& a, const Pose& b) {
  return a.rotation().angularDistance(b.rotation());
}

void validate_box(const Box3D& box) {
  if (!box.center.allFinite()) throw Error("Box3D: non-finite center");
  if (!(box.dims.array() > 0.0).all() || !box.dims.allFinite()) {
    throw Error("Box3D: dims must be strictly positive");
  }
  if (!(box.score >= 0.0 && box.score <= 1.0)) throw Error("Box3D: score outside [0, 1]");
  if (!(box.yaw > -std::numbers::pi && box.yaw <= std::numbers::pi)) {
    throw Error("Box3D: yaw outside (-pi, pi]");
  }
}

Point apply_pose(const Pose& pose, const Point& p) {
  const Eigen::Vector3d in = p.xyz();
  if (!in.allFinite()) throw Error("apply_pose: non-finite point");
  const Eigen::Vector3d out = pose.apply(in);
  return Point{out.x(), out.y(), out.z(), p.intensity, p.dt};
}

PointCloud aggregate_sweeps(std::span<const Sweep> sweeps, std::size_t k) {
  if (sweeps.empty()) throw Error("aggregate_sweeps: no sweeps");
  if (k == 0) throw Error("aggregate_sweeps: k must be >= 1");

  const Sweep& latest = sweeps.back();
  const Pose world_to_latest = latest.ego_pose.inverse();
  const std::size_t first = sweeps.size() > k ? sweeps.size() - k : 0;

  std::size_t total = 0;
  for (std::size_t i = first; i < sweeps.size(); ++i) total += sweeps[i].points.size();

  PointCloud out;
  out.reserve(total);
  // Oldest first, so the newest sweep's points end up last.
  for (std::size_t i = first; i < sweeps.size(); ++i) {
    const Sweep& s = sweeps[i];
    if (i > first && !(s.timestamp > sweeps[i - 1].timestamp)) {
      throw Error("aggregate_sweeps: timestamps must strictly increase");
    }
    const double dt = s.timestamp - latest.timestamp;
    if (i + 1 == sweeps.size()) {
      for (const Point& p : s.points) {
        Point q = p;
        q.dt = 0.0;
        out.push_back(q);
      }
      continue;
    }
    const Pose rel = world_to_latest * s.ego_pose;
    for (const Point& p : s.points) {
      Point q = apply_pose(rel, p);
      q.dt = dt;
      out.push_back(q);
    }
  }
  return out;
}

Box3D compensate_box(const Box3D& box, const Pose& pose_src, const Pose& pose_dst) {
  const Pose rel = pose_dst.inverse() * pose_src;
  Box3D out = box;
  out.center = rel.apply(box.center);

  const Eigen::Vector3d heading(std::cos(box.yaw), std::sin(box.yaw), 0.0);
  const Eigen::Vector3d h = rel.rotate(heading);
  out.yaw = normalize_yaw(std::atan2(h.y(), h.x()));

  if (box.has_velocity()) {
    const Eigen::Vector3d v = rel.rotate(Eigen::Vector3d(box.velocity.x(), box.velocity.y(), 0.0));
    out.velocity = v.head<2>();
  }
  return out;
}

}  // namespace rangeforge
