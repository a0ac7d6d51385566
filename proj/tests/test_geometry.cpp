#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rangeforge/geometry.hpp"

using namespace rangeforge;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> t(-100.0, 100.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return Pose(q, Vector3d(t(rng), t(rng), t(rng)));
}

Vector3d random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  return {u(rng), u(rng), u(rng)};
}

double translation_gap(const Pose& a, const Pose& b) { return (a.translation() - b.translation()).norm(); }

}  // namespace

TEST_CASE("apply_pose examples") {
  const Point p{1, 2, 3, 0.5, 0.0};
  CHECK(apply_pose(Pose::identity(), p) == p);

  const Point moved = apply_pose(Pose(Eigen::Quaterniond::Identity(), Vector3d(10, 0, 0)), Point{});
  CHECK(moved.x == 10.0);
  CHECK(moved.y == 0.0);
  CHECK(moved.z == 0.0);

  // Hand rotation matrix for +90 degrees about z: (x, y) -> (-y, x).
  const Point r = apply_pose(Pose::from_yaw(kPi / 2), Point{1, 0, 0});
  CHECK(std::abs(r.x - 0.0) < 1e-12);
  CHECK(std::abs(r.y - 1.0) < 1e-12);
  CHECK(std::abs(r.z) < 1e-12);
}

TEST_CASE("apply_pose keeps intensity and dt, rejects non-finite points") {
  const Point p{1, 1, 1, 0.25, -0.1};
  const Point q = apply_pose(Pose::from_yaw(0.3, Vector3d(1, 2, 3)), p);
  CHECK(q.intensity == 0.25);
  CHECK(q.dt == -0.1);
  CHECK_THROWS_AS(apply_pose(Pose::identity(), Point{NAN, 0, 0}), Error);
}

TEST_CASE("invert_pose examples") {
  const Pose id = invert_pose(Pose::identity());
  CHECK(id.translation().norm() == 0.0);
  CHECK(rotation_distance(id, Pose::identity()) == 0.0);

  const Pose t = invert_pose(Pose(Eigen::Quaterniond::Identity(), Vector3d(1, 2, 3)));
  CHECK(t.translation() == Vector3d(-1, -2, -3));
}

TEST_CASE("pose round trip on random points") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose p = random_pose(rng);
    const Pose inv = invert_pose(p);
    for (int k = 0; k < 100; ++k) {
      const Vector3d x = random_point(rng);
      CHECK((inv.apply(p.apply(x)) - x).norm() < 1e-9);
    }
  }
}

TEST_CASE("pose invariants: unit rotation, inverse, associativity") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Eigen::Matrix3d r = a.rotation_matrix();
    CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
    CHECK(std::abs(a.rotation().norm() - 1.0) < 1e-9);

    for (const Pose& e : {compose(a, invert_pose(a)), compose(invert_pose(a), a)}) {
      CHECK(e.translation().norm() < 1e-9);
      CHECK(rotation_distance(e, Pose::identity()) < 1e-9);
    }

    const Pose left = compose(compose(a, b), c);
    const Pose right = compose(a, compose(b, c));
    CHECK(translation_gap(left, right) < 1e-9);
    CHECK(rotation_distance(left, right) < 1e-9);
  }
}

TEST_CASE("pose construction validates input") {
  CHECK_THROWS_AS(Pose(Eigen::Quaterniond(0, 0, 0, 0), Vector3d::Zero()), Error);
  CHECK_THROWS_AS(Pose(Eigen::Quaterniond(NAN, 0, 0, 0), Vector3d::Zero()), Error);
  CHECK_THROWS_AS(Pose(Eigen::Quaterniond::Identity(), Vector3d(INFINITY, 0, 0)), Error);
  // Non-unit input is renormalized.
  const Pose p(Eigen::Quaterniond(2, 0, 0, 0), Vector3d::Zero());
  CHECK(std::abs(p.rotation().norm() - 1.0) < 1e-15);
}

TEST_CASE("normalize_yaw maps into (-pi, pi]") {
  CHECK(normalize_yaw(kPi) == doctest::Approx(kPi));
  CHECK(normalize_yaw(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_yaw(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int k = 0; k < 1000; ++k) {
    const double y = normalize_yaw(u(rng));
    CHECK(y > -kPi);
    CHECK(y <= kPi);
  }
}

TEST_CASE("yaw round trips through from_yaw") {
  for (double y : {-3.0, -1.0, 0.0, 0.5, 2.0, 3.1}) CHECK(Pose::from_yaw(y).yaw() == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("aggregate_sweeps examples") {
  const PointCloud cloud = {{1, 2, 3, 0.1, 0}, {4, 5, 6, 0.2, 0}};
  const std::vector<Sweep> one = {{0.0, Pose::identity(), cloud}};

  SUBCASE("k = 1 returns the latest sweep") {
    const std::vector<Sweep> two = {{0.0, Pose::identity(), {{9, 9, 9}}}, {0.1, Pose::from_yaw(0.4), cloud}};
    const PointCloud out = aggregate_sweeps(two, 1);
    REQUIRE(out.size() == cloud.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].xyz() == cloud[i].xyz());
      CHECK(out[i].dt == 0.0);
    }
  }

  SUBCASE("stationary ego doubles the multiset") {
    const std::vector<Sweep> two = {{0.0, Pose::identity(), cloud}, {0.1, Pose::identity(), cloud}};
    const PointCloud out = aggregate_sweeps(two, 2);
    REQUIRE(out.size() == 4);
    int matched = 0;
    for (const Point& p : out) {
      for (const Point& q : cloud) matched += (p.xyz() == q.xyz());
    }
    CHECK(matched == 4);
  }

  SUBCASE("ego translation aligns a static world point") {
    // World point (20,0,0); ego at x=0 then x=5.
    const Pose p0(Eigen::Quaterniond::Identity(), Vector3d(0, 0, 0));
    const Pose p1(Eigen::Quaterniond::Identity(), Vector3d(5, 0, 0));
    const std::vector<Sweep> two = {{0.0, p0, {{20, 0, 0}}}, {0.1, p1, {{15, 0, 0}}}};
    const PointCloud out = aggregate_sweeps(two, 2);
    REQUIRE(out.size() == 2);
    for (const Point& p : out) CHECK((p.xyz() - Vector3d(15, 0, 0)).norm() < 1e-9);
    double dts = 0;
    for (const Point& p : out) dts += p.dt;
    CHECK(dts == doctest::Approx(-0.1));
  }

  SUBCASE("warm-up uses the sweeps that exist") { CHECK(aggregate_sweeps(one, 5).size() == cloud.size()); }

  SUBCASE("errors") {
    CHECK_THROWS_AS(aggregate_sweeps(std::span<const Sweep>{}, 1), Error);
    CHECK_THROWS_AS(aggregate_sweeps(one, 0), Error);
    const std::vector<Sweep> bad = {{0.2, Pose::identity(), cloud}, {0.1, Pose::identity(), cloud}};
    CHECK_THROWS_AS(aggregate_sweeps(bad, 2), Error);
  }
}

TEST_CASE("aggregate_sweeps makes static world points coincide under random ego motion") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector3d> world;
    for (int k = 0; k < 10; ++k) world.push_back(random_point(rng));
    std::vector<Sweep> sweeps;
    for (int s = 0; s < 4; ++s) {
      Sweep sw{0.1 * s, random_pose(rng), {}};
      const Pose inv = invert_pose(sw.ego_pose);
      for (const Vector3d& w : world) {
        const Vector3d e = inv.apply(w);
        sw.points.push_back({e.x(), e.y(), e.z()});
      }
      sweeps.push_back(sw);
    }
    const PointCloud out = aggregate_sweeps(sweeps, 4);
    REQUIRE(out.size() == 40);
    // Output lists the latest sweep first or last; compare every copy to the latest one.
    const PointCloud& latest = sweeps.back().points;
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t k = 0; k < world.size(); ++k) {
        bool found = false;
        for (std::size_t i = s * world.size(); i < (s + 1) * world.size(); ++i) {
          found = found || (out[i].xyz() - latest[k].xyz()).norm() < 1e-9;
        }
        CHECK(found);
      }
    }
  }
}

TEST_CASE("compensate_box examples") {
  Box3D b;
  b.center = Vector3d(50, 0, 0);
  b.dims = Vector3d(4, 2, 1.5);
  b.velocity = Eigen::Vector2d(2, 0);
  b.yaw = 0.3;

  const Pose src = Pose::from_yaw(0.7, Vector3d(3, 4, 0));
  CHECK(compensate_box(b, src, src).center.isApprox(b.center, 1e-12));
  CHECK(compensate_box(b, src, src).yaw == doctest::Approx(b.yaw));

  const Pose p0 = Pose::identity();
  const Pose p1(Eigen::Quaterniond::Identity(), Vector3d(3, 0, 0));
  const Box3D moved = compensate_box(b, p0, p1);
  CHECK((moved.center - Vector3d(47, 0, 0)).norm() < 1e-12);

  // dst frame rotated -pi/2 relative to src: src x axis becomes dst y axis.
  const Box3D turned = compensate_box(b, Pose::identity(), Pose::from_yaw(-kPi / 2));
  CHECK(std::abs(turned.velocity.x() - 0.0) < 1e-12);
  CHECK(std::abs(turned.velocity.y() - 2.0) < 1e-12);
}

TEST_CASE("compensate_box preserves dims, class, score and speed") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 500; ++trial) {
    Box3D b;
    b.center = Vector3d(u(rng), u(rng), u(rng));
    b.dims = Vector3d(1 + std::abs(u(rng)), 1 + std::abs(u(rng)), 1 + std::abs(u(rng)));
    b.velocity = Eigen::Vector2d(u(rng), u(rng));
    b.yaw = normalize_yaw(u(rng));
    b.class_id = trial % 3;
    b.score = 0.5;
    const Pose a = Pose::from_yaw(u(rng), Vector3d(u(rng), u(rng), 0));
    const Pose c = Pose::from_yaw(u(rng), Vector3d(u(rng), u(rng), 0));
    const Box3D out = compensate_box(b, a, c);
    CHECK(out.dims == b.dims);
    CHECK(out.class_id == b.class_id);
    CHECK(out.score == b.score);
    CHECK(std::abs(out.velocity.norm() - b.velocity.norm()) < 1e-12);
    CHECK(out.yaw > -kPi);
    CHECK(out.yaw <= kPi);
    // Round trip.
    const Box3D back = compensate_box(out, c, a);
    CHECK((back.center - b.center).norm() < 1e-9);
  }
}

TEST_CASE("validate_box") {
  Box3D b;
  CHECK_NOTHROW(validate_box(b));
  b.dims.x() = 0;
  CHECK_THROWS_AS(validate_box(b), Error);
  b = Box3D{};
  b.score = 1.5;
  CHECK_THROWS_AS(validate_box(b), Error);
  b = Box3D{};
  b.yaw = 4.0;
  CHECK_THROWS_AS(validate_box(b), Error);
}
