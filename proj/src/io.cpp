#include "rangeforge/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <unistd.h>

namespace rangeforge {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

double number_at(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  const json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

Eigen::Vector3d vec3_at(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) fail(path + "." + key, "expected an array of 3 numbers");
  Eigen::Vector3d out;
  for (int k = 0; k < 3; ++k) {
    if (!v[k].is_number()) fail(path + "." + key + "[" + std::to_string(k) + "]", "expected a number");
    out[k] = v[k].get<double>();
  }
  return out;
}

json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + std::string(name) + "' (expected csv or json)");
}

json box_to_json(const Box3D& box) {
  json j;
  j["center"] = {box.center.x(), box.center.y(), box.center.z()};
  j["dims"] = {box.dims.x(), box.dims.y(), box.dims.z()};
  j["yaw"] = box.yaw;
  j["velocity"] = box.has_velocity() ? json{box.velocity.x(), box.velocity.y()} : json(nullptr);
  j["class_id"] = box.class_id;
  j["score"] = box.score;
  j["track_id"] = box.track_id;
  return j;
}

Box3D box_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a box object");
  Box3D b;
  b.center = vec3_at(j, "center", path);
  b.dims = vec3_at(j, "dims", path);
  b.yaw = number_at(j, "yaw", path);
  if (j.contains("velocity") && !j.at("velocity").is_null()) {
    const json& v = j.at("velocity");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(path + ".velocity", "expected [vx, vy] or null");
    }
    b.velocity = Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
  } else {
    b.velocity = Eigen::Vector2d::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  b.class_id = static_cast<int>(number_at(j, "class_id", path));
  b.score = j.contains("score") ? number_at(j, "score", path) : 1.0;
  b.track_id = j.contains("track_id") ? j.at("track_id").get<std::int64_t>() : -1;
  try {
    validate_box(b);
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return b;
}

json pose_to_json(const Pose& pose) {
  const Eigen::Quaterniond& q = pose.rotation();
  const Eigen::Vector3d& t = pose.translation();
  return json{{"q", {q.w(), q.x(), q.y(), q.z()}}, {"t", {t.x(), t.y(), t.z()}}};
}

Pose pose_from_json(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("q") || !j.at("q").is_array() || j.at("q").size() != 4) {
    fail(path + ".q", "expected [w, x, y, z]");
  }
  const json& q = j.at("q");
  try {
    return Pose(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()),
                vec3_at(j, "t", path));
  } catch (const json::exception& e) {
    fail(path, e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

std::string boxes_to_ndjson(std::span<const std::vector<Box3D>> frames, std::span<const double> timestamps) {
  std::string out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    json line;
    line["frame"] = f;
    line["timestamp"] = f < timestamps.size() ? json(timestamps[f]) : json(nullptr);
    line["boxes"] = json::array();
    for (const Box3D& b : frames[f]) line["boxes"].push_back(box_to_json(b));
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::vector<Box3D>> boxes_from_ndjson(std::string_view text) {
  std::vector<std::vector<Box3D>> frames;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string path = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(path, std::string("invalid JSON: ") + e.what());
    }
    const auto frame = j.contains("frame") ? j.at("frame").get<std::size_t>() : frames.size();
    if (frame >= frames.size()) frames.resize(frame + 1);
    if (!j.contains("boxes") || !j.at("boxes").is_array()) fail(path + ".boxes", "expected an array");
    const json& boxes = j.at("boxes");
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      frames[frame].push_back(box_from_json(boxes[k], path + ".boxes[" + std::to_string(k) + "]"));
    }
  }
  return frames;
}

namespace {

constexpr char kBinaryMagic[8] = {'R', 'F', 'S', 'W', 'E', 'E', 'P', '1'};

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ConfigError("sweeps.bin: truncated file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string sweeps_to_binary(std::span<const Sweep> sweeps) {
  std::string buf(kBinaryMagic, sizeof(kBinaryMagic));
  put<std::uint64_t>(buf, sweeps.size());
  for (const Sweep& s : sweeps) {
    put(buf, s.timestamp);
    const Eigen::Quaterniond& q = s.ego_pose.rotation();
    for (double v : {q.w(), q.x(), q.y(), q.z()}) put(buf, v);
    for (int k = 0; k < 3; ++k) put(buf, s.ego_pose.translation()[k]);
    put<std::uint64_t>(buf, s.points.size());
    for (const Point& p : s.points) put(buf, static_cast<float>(p.x));
    for (const Point& p : s.points) put(buf, static_cast<float>(p.y));
    for (const Point& p : s.points) put(buf, static_cast<float>(p.z));
    for (const Point& p : s.points) put(buf, static_cast<float>(p.intensity));
  }
  return buf;
}

std::vector<Sweep> sweeps_from_binary(const std::string& buf) {
  if (buf.size() < sizeof(kBinaryMagic) || std::memcmp(buf.data(), kBinaryMagic, sizeof(kBinaryMagic)) != 0) {
    throw ConfigError("sweeps.bin: bad magic");
  }
  std::size_t pos = sizeof(kBinaryMagic);
  const auto n = take<std::uint64_t>(buf, pos);
  std::vector<Sweep> sweeps;
  for (std::uint64_t f = 0; f < n; ++f) {
    Sweep s;
    s.timestamp = take<double>(buf, pos);
    double q[4];
    for (double& v : q) v = take<double>(buf, pos);
    Eigen::Vector3d t;
    for (int k = 0; k < 3; ++k) t[k] = take<double>(buf, pos);
    s.ego_pose = Pose(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), t);
    const auto count = take<std::uint64_t>(buf, pos);
    s.points.resize(count);
    for (auto member : {&Point::x, &Point::y, &Point::z, &Point::intensity}) {
      for (Point& p : s.points) p.*member = take<float>(buf, pos);
    }
    sweeps.push_back(std::move(s));
  }
  return sweeps;
}

std::string sweeps_to_ndjson(std::span<const Sweep> sweeps) {
  std::string out;
  for (std::size_t f = 0; f < sweeps.size(); ++f) {
    const Sweep& s = sweeps[f];
    json line;
    line["frame"] = f;
    line["timestamp"] = s.timestamp;
    line["pose"] = pose_to_json(s.ego_pose);
    json pts = json::array();
    for (const Point& p : s.points) pts.push_back({p.x, p.y, p.z, p.intensity});
    line["points"] = std::move(pts);
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<Sweep> sweeps_from_ndjson(const std::string& text) {
  std::vector<Sweep> sweeps;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string path = "sweeps.ndjson line " + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      Sweep s;
      s.timestamp = number_at(j, "timestamp", path);
      s.ego_pose = pose_from_json(j.at("pose"), path + ".pose");
      for (const json& p : j.at("points")) {
        s.points.push_back(Point{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(),
                                 p.size() > 3 ? p.at(3).get<double>() : 0.0, 0.0});
      }
      sweeps.push_back(std::move(s));
    } catch (const json::exception& e) {
      fail(path, e.what());
    }
  }
  return sweeps;
}

}  // namespace

void write_scenario(const Scenario& scenario, const std::filesystem::path& dir, SweepStorage storage) {
  std::filesystem::create_directories(dir);
  std::vector<double> timestamps;
  for (const Sweep& s : scenario.sweeps) timestamps.push_back(s.timestamp);

  json meta;
  meta["frames"] = scenario.sweeps.size();
  meta["annotation_range"] = scenario.annotation_range;
  meta["sweeps"] = storage == SweepStorage::NdJson ? "sweeps.ndjson" : "sweeps.bin";
  meta["gt"] = "gt.ndjson";

  if (storage == SweepStorage::NdJson) {
    write_file_atomic(dir / "sweeps.ndjson", sweeps_to_ndjson(scenario.sweeps));
  } else {
    write_file_atomic(dir / "sweeps.bin", sweeps_to_binary(scenario.sweeps));
  }
  write_file_atomic(dir / "gt.ndjson", boxes_to_ndjson(scenario.truth, timestamps));
  write_file_atomic(dir / "scenario.json", meta.dump(2) + "\n");
}

Scenario read_scenario(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text_file(dir / "scenario.json"));
  } catch (const json::exception& e) {
    throw ConfigError((dir / "scenario.json").string() + ": " + e.what());
  }
  Scenario sc;
  sc.annotation_range = meta.value("annotation_range", std::numeric_limits<double>::infinity());
  const std::string sweeps_name = meta.value("sweeps", std::string("sweeps.ndjson"));
  const std::string text = read_text_file(dir / sweeps_name);
  sc.sweeps = sweeps_name.ends_with(".bin") ? sweeps_from_binary(text) : sweeps_from_ndjson(text);
  sc.truth = boxes_from_ndjson(read_text_file(dir / meta.value("gt", std::string("gt.ndjson"))));
  sc.truth.resize(sc.sweeps.size());
  return sc;
}

namespace {

json class_eval_to_json(const ClassEval& c) {
  return json{{"class_id", c.class_id}, {"ap", c.ap},       {"ate", c.ate},
              {"ase", c.ase},           {"aoe", c.aoe},     {"ave", c.ave},
              {"cds", c.cds},           {"nds", c.nds},     {"support", c.support},
              {"true_positives", c.true_positives},         {"no_matches", c.no_matches}};
}

ClassEval class_eval_from_json(const json& j) {
  ClassEval c;
  c.class_id = j.at("class_id").get<int>();
  c.ap = j.at("ap").get<double>();
  c.ate = j.at("ate").get<double>();
  c.ase = j.at("ase").get<double>();
  c.aoe = j.at("aoe").get<double>();
  c.ave = j.at("ave").get<double>();
  c.cds = j.at("cds").get<double>();
  c.nds = j.at("nds").get<double>();
  c.support = j.at("support").get<std::size_t>();
  c.true_positives = j.at("true_positives").get<std::size_t>();
  c.no_matches = j.at("no_matches").get<bool>();
  return c;
}

json timings_to_json(const StageTimings& t) {
  return json{{"point_proc", t.point_proc}, {"backbone", t.backbone}, {"neck", t.neck},
              {"head", t.head},             {"post_proc", t.post_proc}};
}

StageTimings timings_from_json(const json& j) {
  return StageTimings{j.at("point_proc").get<double>(), j.at("backbone").get<double>(), j.at("neck").get<double>(),
                      j.at("head").get<double>(), j.at("post_proc").get<double>()};
}

std::string band_label(const RangeBand& b) {
  std::ostringstream os;
  os << b.inner() << '-';
  if (std::isfinite(b.outer())) {
    os << b.outer();
  } else {
    os << "inf";
  }
  return os.str();
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json report_to_json(const CohortReport& report) {
  json j;
  j["method"] = report.method;
  if (report.latency) {
    const LatencyStats& l = *report.latency;
    j["latency"] = json{{"mean_ms", l.mean_ms}, {"std_ms", l.std_ms}, {"frames", l.frames},
                        {"stage_means", timings_to_json(l.stage_means)}};
  } else {
    j["latency"] = nullptr;
  }
  j["bands"] = json::array();
  for (const BandEval& b : report.bands) {
    json jb;
    jb["band"] = {b.band.inner(), optional_number(b.band.outer())};
    jb["has_support"] = b.has_support;
    jb["aggregate"] = class_eval_to_json(b.aggregate);
    jb["classes"] = json::array();
    for (const ClassEval& c : b.classes) jb["classes"].push_back(class_eval_to_json(c));
    jb["excluded_classes"] = b.excluded_classes;
    j["bands"].push_back(std::move(jb));
  }
  return j;
}

CohortReport report_from_json(const json& j) {
  try {
    CohortReport r;
    r.method = j.at("method").get<std::string>();
    if (!j.at("latency").is_null()) {
      const json& l = j.at("latency");
      r.latency = LatencyStats{l.at("mean_ms").get<double>(), l.at("std_ms").get<double>(),
                               timings_from_json(l.at("stage_means")), l.at("frames").get<std::size_t>()};
    }
    for (const json& jb : j.at("bands")) {
      BandEval b;
      b.band = RangeBand(jb.at("band").at(0).get<double>(), number_or_inf(jb.at("band").at(1)));
      b.has_support = jb.at("has_support").get<bool>();
      b.aggregate = class_eval_from_json(jb.at("aggregate"));
      for (const json& c : jb.at("classes")) b.classes.push_back(class_eval_from_json(c));
      b.excluded_classes = jb.at("excluded_classes").get<std::vector<int>>();
      r.bands.push_back(std::move(b));
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report JSON: ") + e.what());
  }
}

std::string emit_report(std::span<const CohortReport> reports, ReportFormat format) {
  if (format == ReportFormat::Json) {
    json j;
    j["reports"] = json::array();
    for (const CohortReport& r : reports) j["reports"].push_back(report_to_json(r));
    return j.dump(2) + "\n";
  }
  std::string out = "method,band,class,ap,ate,ase,aoe,cds,latency_mean_ms,latency_std_ms\n";
  for (const CohortReport& r : reports) {
    const std::string lat_mean = r.latency ? csv_number(r.latency->mean_ms) : "";
    const std::string lat_std = r.latency ? csv_number(r.latency->std_ms) : "";
    auto row = [&](const std::string& band, const std::string& cls, const ClassEval& c) {
      out += csv_field(r.method) + ',' + band + ',' + cls + ',' + csv_number(c.ap) + ',' + csv_number(c.ate) + ',' +
             csv_number(c.ase) + ',' + csv_number(c.aoe) + ',' + csv_number(c.cds) + ',' + lat_mean + ',' + lat_std +
             '\n';
    };
    for (const BandEval& b : r.bands) {
      if (!b.has_support) continue;
      const std::string band = band_label(b.band);
      for (const ClassEval& c : b.classes) row(band, std::to_string(c.class_id), c);
      row(band, "all", b.aggregate);
    }
  }
  return out;
}

std::string emit_report(const CohortReport& report, ReportFormat format) {
  return emit_report(std::span<const CohortReport>(&report, 1), format);
}

std::string emit_frontier_csv(std::span<const CohortReport> reports) {
  std::vector<RangeBand> bands;
  for (const CohortReport& r : reports) {
    for (const BandEval& b : r.bands) {
      if (std::find(bands.begin(), bands.end(), b.band) == bands.end()) bands.push_back(b.band);
    }
  }
  std::string out = "method";
  for (const RangeBand& b : bands) out += ",cds_" + band_label(b);
  out += ",latency_mean_ms,latency_std_ms\n";
  for (const CohortReport& r : reports) {
    out += csv_field(r.method);
    for (const RangeBand& band : bands) {
      out += ',';
      for (const BandEval& b : r.bands) {
        if (b.band == band && b.has_support) out += csv_number(b.aggregate.cds);
      }
    }
    out += ',' + (r.latency ? csv_number(r.latency->mean_ms) : std::string()) + ',' +
           (r.latency ? csv_number(r.latency->std_ms) : std::string()) + '\n';
  }
  return out;
}

std::vector<CohortReport> parse_json_reports(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report JSON: ") + e.what());
  }
  std::vector<CohortReport> out;
  if (!j.contains("reports") || !j.at("reports").is_array()) throw ConfigError("report JSON: missing 'reports' array");
  for (const json& r : j.at("reports")) out.push_back(report_from_json(r));
  return out;
}

std::vector<TimingRow> parse_timing_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  std::vector<TimingRow> rows;
  std::size_t line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      cells.push_back(cell);
    }
    return cells;
  };
  const std::vector<std::string> required = {"range", "voxel_reciprocal", "occupied", "point_proc",
                                             "backbone", "neck", "head", "post_proc"};
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    const auto cells = split(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
      for (const auto& name : required) {
        if (!col.contains(name)) throw ConfigError("timing CSV: missing column '" + name + "'");
      }
      continue;
    }
    auto value = [&](const std::string& name) {
      const std::size_t k = col.at(name);
      if (k >= cells.size()) throw ConfigError("timing CSV line " + std::to_string(line_no) + ": missing " + name);
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[k], &used);
        if (used != cells[k].size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("timing CSV line " + std::to_string(line_no) + ": bad number in " + name);
      }
    };
    TimingRow r;
    r.range = value("range");
    r.voxel_reciprocal = value("voxel_reciprocal");
    r.occupied = value("occupied");
    r.measured = {value("point_proc"), value("backbone"), value("neck"), value("head"), value("post_proc")};
    rows.push_back(r);
  }
  if (header.empty()) throw ConfigError("timing CSV: empty input");
  return rows;
}

json calibration_to_json(const CalibrationResult& result) {
  const LatencyParams& p = result.params;
  json j;
  j["latency"] = json{{"c_point_per_kvoxel", p.c_point_per_kvoxel},
                      {"c_backbone_per_Mcell", p.c_backbone_per_Mcell},
                      {"c_neck_per_Mcell", p.c_neck_per_Mcell},
                      {"c_head", p.c_head},
                      {"c_post", p.c_post}};
  j["relative_residuals"] = json::array();
  for (const StageTimings& r : result.relative_residuals) {
    j["relative_residuals"].push_back(json{{"point_proc", optional_number(r.point_proc)},
                                           {"backbone", optional_number(r.backbone)},
                                           {"neck", optional_number(r.neck)},
                                           {"head", optional_number(r.head)},
                                           {"post_proc", optional_number(r.post_proc)}});
  }
  return j;
}

std::vector<RangeBand> parse_bands(std::string_view text) {
  std::vector<RangeBand> bands;
  std::string s(text);
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("--bands: expected inner:outer, got '" + item + "'");
    try {
      const double inner = std::stod(item.substr(0, colon));
      const std::string outer_text = item.substr(colon + 1);
      const double outer = outer_text == "inf" ? std::numeric_limits<double>::infinity() : std::stod(outer_text);
      bands.emplace_back(inner, outer);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("--bands: bad band '" + item + "': " + e.what());
    }
  }
  if (bands.empty()) throw ConfigError("--bands: no bands given");
  return bands;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp.string() + ": cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(tmp.string() + ": write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rangeforge
