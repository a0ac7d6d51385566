#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "rangeforge/io.hpp"

using namespace rangeforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rangeforge_test_io_" + name);
  fs::remove_all(p);
  return p;
}

CohortReport populated_report() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-120, 120), s(0, 1);
  std::vector<std::vector<Box3D>> gts(3), dets(3);
  for (std::size_t f = 0; f < 3; ++f) {
    for (int k = 0; k < 20; ++k) {
      Box3D g;
      g.center = {u(rng), u(rng), 0.7};
      g.dims = {4, 2, 1.5};
      g.class_id = k % 3;
      gts[f].push_back(g);
      Box3D d = g;
      d.center.x() += 0.3 * s(rng);
      d.score = s(rng);
      d.yaw = 0.1 * s(rng);
      if (k % 5) dets[f].push_back(d);
    }
  }
  const std::vector<RangeBand> bands = {{0, 50}, {50, 100}, {100, INFINITY}};
  CohortReport r = evaluate_cohorts(dets, gts, bands);
  r.method = "ensemble, \"quoted\"";
  r.latency = LatencyStats{94.1, 3.25, {10, 20, 30, 4, 30.1}, 3};
  return r;
}

}  // namespace

TEST_CASE("box JSON round trip, including unknown velocity") {
  Box3D b;
  b.center = {1.25, -3.5, 0.125};
  b.dims = {4.1, 1.9, 1.6};
  b.yaw = -2.9;
  b.velocity = {0.1, 0.2};
  b.class_id = 2;
  b.score = 0.375;
  b.track_id = 12;
  CHECK(box_from_json(box_to_json(b)) == b);

  b.velocity = {NAN, NAN};
  const Box3D back = box_from_json(box_to_json(b));
  CHECK_FALSE(back.has_velocity());
  CHECK(box_to_json(b)["velocity"].is_null());
}

TEST_CASE("box JSON errors name the path") {
  nlohmann::json j = box_to_json(Box3D{});
  j["dims"] = {1, 1};
  CHECK_THROWS_WITH_AS(box_from_json(j, "$.boxes[3]"), doctest::Contains("$.boxes[3].dims"), ConfigError);
  j = box_to_json(Box3D{});
  j["score"] = 2.0;
  CHECK_THROWS_AS(box_from_json(j), ConfigError);
}

TEST_CASE("pose JSON round trip") {
  const Pose p = Pose::from_yaw(0.7, Eigen::Vector3d(1, 2, 3));
  const Pose q = pose_from_json(pose_to_json(p));
  CHECK(q.translation() == p.translation());
  CHECK(rotation_distance(p, q) < 1e-12);
  CHECK_THROWS_AS(pose_from_json(nlohmann::json{{"q", {0, 0, 0, 0}}, {"t", {0, 0, 0}}}), ConfigError);
}

TEST_CASE("NDJSON box frames round trip") {
  Box3D a;
  a.center = {3, 4, 0};
  Box3D b = a;
  b.class_id = 1;
  b.score = 0.5;
  const std::vector<std::vector<Box3D>> frames = {{a, b}, {}, {b}};
  const std::vector<double> ts = {0.0, 0.5, 1.0};
  const auto back = boxes_from_ndjson(boxes_to_ndjson(frames, ts));
  REQUIRE(back.size() == 3);
  CHECK(back == frames);
  CHECK_THROWS_WITH_AS(boxes_from_ndjson("{\"frame\":0,\"boxes\":[{}]}\n"), doctest::Contains("line 1"), ConfigError);
}

TEST_CASE("scenario storage round trips in both formats") {
  ScenarioSpec spec;
  spec.n_frames = 3;
  spec.n_objects = 10;
  const Scenario sc = generate_scenario(spec);
  for (SweepStorage storage : {SweepStorage::NdJson, SweepStorage::BinaryF32}) {
    const fs::path dir = scratch(storage == SweepStorage::NdJson ? "ndjson" : "bin");
    write_scenario(sc, dir, storage);
    const Scenario back = read_scenario(dir);
    REQUIRE(back.sweeps.size() == sc.sweeps.size());
    CHECK(back.truth == sc.truth);
    CHECK(back.annotation_range == sc.annotation_range);
    for (std::size_t f = 0; f < sc.sweeps.size(); ++f) {
      CHECK(back.sweeps[f].timestamp == sc.sweeps[f].timestamp);
      CHECK(rotation_distance(back.sweeps[f].ego_pose, sc.sweeps[f].ego_pose) < 1e-12);
      CHECK(back.sweeps[f].ego_pose.translation() == sc.sweeps[f].ego_pose.translation());
      REQUIRE(back.sweeps[f].points.size() == sc.sweeps[f].points.size());
      const double tol = storage == SweepStorage::NdJson ? 0.0 : 1e-4;
      for (std::size_t k = 0; k < sc.sweeps[f].points.size(); ++k) {
        CHECK((back.sweeps[f].points[k].xyz() - sc.sweeps[f].points[k].xyz()).norm() <= tol);
      }
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("report JSON is lossless") {
  const CohortReport r = populated_report();
  const auto back = parse_json_reports(emit_report(r, ReportFormat::Json));
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);

  CohortReport no_latency = r;
  no_latency.latency.reset();
  CHECK(parse_json_reports(emit_report(no_latency, ReportFormat::Json))[0] == no_latency);
}

TEST_CASE("report CSV schema") {
  const std::string header = "method,band,class,ap,ate,ase,aoe,cds,latency_mean_ms,latency_std_ms\n";
  CHECK(emit_report(CohortReport{}, ReportFormat::Csv) == header);

  const CohortReport r = populated_report();
  const std::string csv = emit_report(r, ReportFormat::Csv);
  CHECK(csv.starts_with(header));
  CHECK(csv.find("\"ensemble, \"\"quoted\"\"\",0-50,all,") != std::string::npos);
  CHECK(csv.find(",100-inf,") != std::string::npos);
  CHECK(csv.find(",94.1,3.25\n") != std::string::npos);
  std::size_t rows = 0;
  for (const BandEval& b : r.bands) rows += b.has_support ? b.classes.size() + 1 : 0;
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == rows + 1);

  CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
  CHECK(parse_report_format("json") == ReportFormat::Json);
}

TEST_CASE("frontier CSV has one row per method") {
  CohortReport a = populated_report(), b = populated_report();
  b.method = "near-far";
  b.latency->mean_ms = 60;
  const std::vector<CohortReport> both = {a, b};
  const std::string csv = emit_frontier_csv(both);
  CHECK(csv.starts_with("method,cds_0-50,cds_50-100,cds_100-inf,cds_0-inf,latency_mean_ms,latency_std_ms\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nnear-far,") != std::string::npos);
}

TEST_CASE("timing CSV parsing") {
  const std::string text =
      "# comment\n"
      "range,voxel_reciprocal,occupied,point_proc,backbone,neck,head,post_proc\n"
      "50,4,16000,10.5,3.5,1.9,1.2,58.2\n"
      "150, 2, 9000, 4.0, 6.6, 8.1, 2.7, 60.0\n";
  const auto rows = parse_timing_csv(text);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].range == 150);
  CHECK(rows[1].measured.neck == 8.1);
  CHECK_THROWS_AS(parse_timing_csv("range,voxel_reciprocal\n1,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_timing_csv(text + "50,4,x,1,1,1,1,1\n"), ConfigError);
}

TEST_CASE("band list parsing") {
  const auto bands = parse_bands("0:50,50:100,100:inf");
  REQUIRE(bands.size() == 3);
  CHECK(bands[2].outer() == INFINITY);
  CHECK_THROWS_AS(parse_bands("0-50"), ConfigError);
  CHECK_THROWS_AS(parse_bands("50:10"), Error);
  CHECK_THROWS_AS(parse_bands(""), ConfigError);
}

TEST_CASE("atomic writes leave only the final file") {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "a.txt", "first");
  write_file_atomic(dir / "a.txt", "second");
  CHECK(read_text_file(dir / "a.txt") == "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), ConfigError);
  fs::remove_all(dir);
}
