#include "rangeforge/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

namespace rangeforge {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(path + "." + key, "unknown key");
    }
  }
}

double get_number(const json& j, const char* key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(path + "." + key, "expected a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) fail(path + "." + key, "expected a finite number");
  return v;
}

double get_positive(const json& j, const char* key, const std::string& path, double fallback) {
  const double v = get_number(j, key, path, fallback);
  if (!(v > 0.0)) fail(path + "." + key, "must be positive");
  return v;
}

double get_non_negative(const json& j, const char* key, const std::string& path, double fallback) {
  const double v = get_number(j, key, path, fallback);
  if (!(v >= 0.0)) fail(path + "." + key, "must be >= 0");
  return v;
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& path, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer() || j.at(key).get<std::int64_t>() < 0) {
    if (!j.at(key).is_number_unsigned()) fail(path + "." + key, "expected a non-negative integer");
  }
  return j.at(key).get<std::uint64_t>();
}

std::string get_string(const json& j, const char* key, const std::string& path, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

std::string require_string(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) fail(path + "." + key, "missing");
  return get_string(j, key, path, "");
}

bool get_bool(const json& j, const char* key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

template <typename Enum>
Enum parse_enum(const json& j, const char* key, const std::string& path, Enum fallback,
                std::initializer_list<std::pair<const char*, Enum>> names) {
  if (!j.contains(key)) return fallback;
  const std::string v = get_string(j, key, path, "");
  for (const auto& [name, value] : names) {
    if (v == name) return value;
  }
  std::string expected;
  for (const auto& [name, value] : names) expected += std::string(expected.empty() ? "" : ", ") + name;
  fail(path + "." + key, "unknown value '" + v + "' (expected one of: " + expected + ")");
}

Eigen::Vector2d get_vec2(const json& j, const char* key, const std::string& path, const Eigen::Vector2d& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(path + "." + key, "expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

RangeBand parse_band(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !(v[1].is_number() || v[1].is_null())) {
    fail(path, "expected [inner, outer] (outer may be null for infinity)");
  }
  try {
    return RangeBand(v[0].get<double>(),
                     v[1].is_null() ? std::numeric_limits<double>::infinity() : v[1].get<double>());
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

OracleParams parse_oracle(const json& j, const std::string& path, OracleParams o, bool* seed_given) {
  check_keys(j,
             {"base_recall", "density_floor", "recall_decay", "sigma_t0", "sigma_t_slope", "sigma_t_voxel",
              "yaw_sigma", "score_calibration", "fp_rate", "seed"},
             path);
  o.base_recall = get_non_negative(j, "base_recall", path, o.base_recall);
  if (o.base_recall > 1.0) fail(path + ".base_recall", "must be in [0, 1]");
  o.density_floor = get_non_negative(j, "density_floor", path, o.density_floor);
  o.recall_decay = get_non_negative(j, "recall_decay", path, o.recall_decay);
  o.sigma_t0 = get_non_negative(j, "sigma_t0", path, o.sigma_t0);
  o.sigma_t_slope = get_non_negative(j, "sigma_t_slope", path, o.sigma_t_slope);
  o.sigma_t_voxel = get_non_negative(j, "sigma_t_voxel", path, o.sigma_t_voxel);
  o.yaw_sigma = get_non_negative(j, "yaw_sigma", path, o.yaw_sigma);
  o.fp_rate = get_non_negative(j, "fp_rate", path, o.fp_rate);
  o.score_calibration = parse_enum(j, "score_calibration", path, o.score_calibration,
                                   {{"calibrated", ScoreCalibration::Calibrated},
                                    {"overconfident_far", ScoreCalibration::OverconfidentFar},
                                    {"zero_outside_train", ScoreCalibration::ZeroOutsideTrain}});
  if (j.contains("seed")) {
    o.seed = get_u64(j, "seed", path, 0);
    *seed_given = true;
  }
  return o;
}

LatencyParams parse_latency(const json& j, const std::string& path, LatencyParams l) {
  check_keys(j, {"c_point_per_kvoxel", "c_backbone_per_Mcell", "c_neck_per_Mcell", "c_head", "c_post"}, path);
  l.c_point_per_kvoxel = get_non_negative(j, "c_point_per_kvoxel", path, l.c_point_per_kvoxel);
  l.c_backbone_per_Mcell = get_non_negative(j, "c_backbone_per_Mcell", path, l.c_backbone_per_Mcell);
  l.c_neck_per_Mcell = get_non_negative(j, "c_neck_per_Mcell", path, l.c_neck_per_Mcell);
  l.c_head = get_non_negative(j, "c_head", path, l.c_head);
  l.c_post = get_non_negative(j, "c_post", path, l.c_post);
  return l;
}

RangeExpertConfig parse_expert(const json& j, const std::string& path, std::uint64_t experiment_seed) {
  check_keys(j,
             {"name", "profile", "train_range", "voxel_reciprocal", "infer_range", "generalization_mode", "oracle",
              "latency"},
             path);
  RangeExpertConfig e;
  e.name = require_string(j, "name", path);
  if (j.contains("profile")) {
    const std::string profile = get_string(j, "profile", path, "");
    try {
      const DetectorProfile& p = detector_profile(profile);
      e.generalization_mode = p.generalization_mode;
      e.oracle = p.oracle;
      e.latency = p.latency;
    } catch (const Error& err) {
      fail(path + ".profile", err.what());
    }
  }
  e.train_range = get_positive(j, "train_range", path, e.train_range);
  e.voxel_reciprocal = get_positive(j, "voxel_reciprocal", path, e.voxel_reciprocal);
  e.infer_range = get_positive(j, "infer_range", path, e.train_range);
  e.generalization_mode = parse_enum(j, "generalization_mode", path, e.generalization_mode,
                                     {{"local_calibrated", GeneralizationMode::LocalCalibrated},
                                      {"global_overconfident", GeneralizationMode::GlobalOverconfident},
                                      {"soft_target", GeneralizationMode::SoftTarget},
                                      {"absolute_pe_collapse", GeneralizationMode::AbsolutePeCollapse}});
  bool seed_given = false;
  if (j.contains("oracle")) e.oracle = parse_oracle(j.at("oracle"), path + ".oracle", e.oracle, &seed_given);
  // Derived from the name so an expert behaves identically in every pipeline.
  if (!seed_given) e.oracle.seed = mix_seed(experiment_seed, fnv1a(e.name));
  if (j.contains("latency")) e.latency = parse_latency(j.at("latency"), path + ".latency", e.latency);
  return e;
}

EnsembleSpec parse_ensemble(const json& j, const std::string& path, const ExperimentConfig& cfg) {
  EnsembleSpec spec;
  spec.combine_mode = parse_enum(j, "combine", path, CombineMode::BandRoute,
                                 {{"band_route", CombineMode::BandRoute}, {"nms_pool", CombineMode::NmsPool}});
  spec.test_time_mask = get_bool(j, "test_time_mask", path, false);
  spec.nms_threshold = get_positive(j, "nms_threshold", path, 2.0);
  spec.range_mode = cfg.match.range_mode;
  if (!j.contains("experts") || !j.at("experts").is_array() || j.at("experts").empty()) {
    fail(path + ".experts", "expected a non-empty array");
  }
  const json& experts = j.at("experts");
  for (std::size_t k = 0; k < experts.size(); ++k) {
    const std::string p = path + ".experts[" + std::to_string(k) + "]";
    check_keys(experts[k], {"expert", "band"}, p);
    const std::string name = require_string(experts[k], "expert", p);
    const RangeExpertConfig* found = nullptr;
    for (const auto& e : cfg.experts) {
      if (e.name == name) found = &e;
    }
    if (!found) fail(p + ".expert", "no expert named '" + name + "'");
    if (!experts[k].contains("band")) fail(p + ".band", "missing");
    spec.experts.push_back({*found, parse_band(experts[k].at("band"), p + ".band")});
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(path + ".experts", e.what());
  }
  return spec;
}

}  // namespace

ScenarioSpec parse_scenario_spec(const json& j, const std::string& path) {
  check_keys(j,
             {"n_frames", "frame_dt", "ego", "n_objects", "classes", "min_spawn_range", "max_range", "spawn",
              "object_points_k", "ground_k", "clutter_density", "seed"},
             path);
  ScenarioSpec s;
  const double n_frames = get_positive(j, "n_frames", path, static_cast<double>(s.n_frames));
  if (n_frames != std::floor(n_frames)) fail(path + ".n_frames", "expected an integer");
  s.n_frames = static_cast<std::size_t>(n_frames);
  s.frame_dt = get_positive(j, "frame_dt", path, s.frame_dt);
  s.n_objects = static_cast<std::size_t>(get_non_negative(j, "n_objects", path, static_cast<double>(s.n_objects)));
  s.min_spawn_range = get_non_negative(j, "min_spawn_range", path, s.min_spawn_range);
  s.max_range = get_positive(j, "max_range", path, s.max_range);
  s.spawn = parse_enum(j, "spawn", path, s.spawn,
                       {{"uniform_radius", SpawnDistribution::UniformRadius},
                        {"uniform_area", SpawnDistribution::UniformArea}});
  s.object_points_k = get_non_negative(j, "object_points_k", path, s.object_points_k);
  s.ground_k = get_non_negative(j, "ground_k", path, s.ground_k);
  s.clutter_density = get_non_negative(j, "clutter_density", path, s.clutter_density);
  s.seed = get_u64(j, "seed", path, s.seed);

  if (j.contains("ego")) {
    const json& e = j.at("ego");
    const std::string p = path + ".ego";
    check_keys(e, {"motion", "velocity", "yaw", "waypoints"}, p);
    s.ego.kind = parse_enum(e, "motion", p, s.ego.kind,
                            {{"static", EgoMotionKind::Static},
                             {"constant_velocity", EgoMotionKind::ConstantVelocity},
                             {"waypoints", EgoMotionKind::Waypoints}});
    s.ego.velocity = get_vec2(e, "velocity", p, s.ego.velocity);
    s.ego.yaw = get_number(e, "yaw", p, s.ego.yaw);
    if (e.contains("waypoints")) {
      if (!e.at("waypoints").is_array()) fail(p + ".waypoints", "expected an array");
      for (std::size_t k = 0; k < e.at("waypoints").size(); ++k) {
        const json& w = e.at("waypoints")[k];
        const std::string wp = p + ".waypoints[" + std::to_string(k) + "]";
        check_keys(w, {"t", "x", "y", "yaw"}, wp);
        s.ego.waypoints.push_back({get_number(w, "t", wp, 0.0), get_number(w, "x", wp, 0.0),
                                   get_number(w, "y", wp, 0.0), get_number(w, "yaw", wp, 0.0)});
      }
    }
  }
  if (j.contains("classes")) {
    if (!j.at("classes").is_array()) fail(path + ".classes", "expected an array");
    s.classes.clear();
    for (std::size_t k = 0; k < j.at("classes").size(); ++k) {
      const json& c = j.at("classes")[k];
      const std::string cp = path + ".classes[" + std::to_string(k) + "]";
      check_keys(c, {"class_id", "weight", "dims", "max_speed"}, cp);
      ObjectClassSpec cls;
      cls.class_id = static_cast<int>(get_non_negative(c, "class_id", cp, 0.0));
      cls.weight = get_non_negative(c, "weight", cp, 1.0);
      cls.max_speed = get_non_negative(c, "max_speed", cp, cls.max_speed);
      if (c.contains("dims")) {
        const json& d = c.at("dims");
        if (!d.is_array() || d.size() != 3) fail(cp + ".dims", "expected [length, width, height]");
        for (int i = 0; i < 3; ++i) {
          if (!d[i].is_number() || !(d[i].get<double>() > 0.0)) fail(cp + ".dims", "dims must be positive numbers");
          cls.dims[i] = d[i].get<double>();
        }
      }
      s.classes.push_back(cls);
    }
  }
  try {
    s.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return s;
}

const RangeExpertConfig& ExperimentConfig::expert(const std::string& name) const {
  for (const auto& e : experts) {
    if (e.name == name) return e;
  }
  throw ConfigError("no expert named '" + name + "'");
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"seed", "scenario", "scenario_path", "sweeps_per_frame", "experts", "pipelines", "frontier", "eval",
              "output"},
             "$");
  ExperimentConfig cfg;
  const std::uint64_t seed = get_u64(j, "seed", "$", 0);

  if (j.contains("scenario") == j.contains("scenario_path")) {
    fail("$", "exactly one of 'scenario' or 'scenario_path' is required");
  }
  if (j.contains("scenario")) {
    cfg.scenario = parse_scenario_spec(j.at("scenario"), "$.scenario");
  } else {
    const std::filesystem::path p = get_string(j, "scenario_path", "$", "");
    cfg.scenario_path = p.is_absolute() ? p : base_dir / p;
  }
  const double spf = get_positive(j, "sweeps_per_frame", "$", 5.0);
  if (spf != std::floor(spf)) fail("$.sweeps_per_frame", "expected an integer");
  cfg.sweeps_per_frame = static_cast<std::size_t>(spf);

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, {"bands", "thresholds", "tp_error_threshold", "ap_recall_points", "range_mode", "normalizers"},
               "$.eval");
    if (e.contains("bands")) {
      if (!e.at("bands").is_array() || e.at("bands").empty()) fail("$.eval.bands", "expected a non-empty array");
      cfg.bands.clear();
      for (std::size_t k = 0; k < e.at("bands").size(); ++k) {
        cfg.bands.push_back(parse_band(e.at("bands")[k], "$.eval.bands[" + std::to_string(k) + "]"));
      }
    }
    if (e.contains("thresholds")) {
      if (!e.at("thresholds").is_array()) fail("$.eval.thresholds", "expected an array");
      cfg.match.thresholds.clear();
      for (const json& t : e.at("thresholds")) {
        if (!t.is_number()) fail("$.eval.thresholds", "expected numbers");
        cfg.match.thresholds.push_back(t.get<double>());
      }
    }
    cfg.match.tp_error_threshold = get_positive(e, "tp_error_threshold", "$.eval", cfg.match.tp_error_threshold);
    cfg.match.ap_recall_points =
        static_cast<int>(get_positive(e, "ap_recall_points", "$.eval", cfg.match.ap_recall_points));
    cfg.match.range_mode = parse_enum(e, "range_mode", "$.eval", cfg.match.range_mode,
                                      {{"bev_l2", RangeMode::BevL2}, {"bev_linf", RangeMode::BevLinf}});
    if (e.contains("normalizers")) {
      const json& n = e.at("normalizers");
      check_keys(n, {"ate", "ase", "aoe", "ave"}, "$.eval.normalizers");
      cfg.match.ate_normalizer = get_positive(n, "ate", "$.eval.normalizers", cfg.match.ate_normalizer);
      cfg.match.ase_normalizer = get_positive(n, "ase", "$.eval.normalizers", cfg.match.ase_normalizer);
      cfg.match.aoe_normalizer = get_positive(n, "aoe", "$.eval.normalizers", cfg.match.aoe_normalizer);
      cfg.match.ave_normalizer = get_positive(n, "ave", "$.eval.normalizers", cfg.match.ave_normalizer);
    }
    try {
      cfg.match.validate();
    } catch (const Error& err) {
      fail("$.eval", err.what());
    }
  }

  if (!j.contains("experts") || !j.at("experts").is_array() || j.at("experts").empty()) {
    fail("$.experts", "expected a non-empty array");
  }
  std::set<std::string> names;
  for (std::size_t k = 0; k < j.at("experts").size(); ++k) {
    const std::string p = "$.experts[" + std::to_string(k) + "]";
    RangeExpertConfig e = parse_expert(j.at("experts")[k], p, seed);
    if (!names.insert(e.name).second) fail(p + ".name", "duplicate expert name '" + e.name + "'");
    cfg.experts.push_back(std::move(e));
  }

  std::set<std::string> pipeline_names;
  if (j.contains("pipelines")) {
    if (!j.at("pipelines").is_array()) fail("$.pipelines", "expected an array");
    for (std::size_t k = 0; k < j.at("pipelines").size(); ++k) {
      const json& pj = j.at("pipelines")[k];
      const std::string p = "$.pipelines[" + std::to_string(k) + "]";
      check_keys(pj, {"name", "type", "expert", "experts", "combine", "test_time_mask", "nms_threshold", "frequencies"},
                 p);
      PipelineSpec ps;
      ps.name = require_string(pj, "name", p);
      if (!pipeline_names.insert(ps.name).second) fail(p + ".name", "duplicate pipeline name '" + ps.name + "'");
      ps.kind = parse_enum(pj, "type", p, PipelineKind::Expert,
                           {{"expert", PipelineKind::Expert},
                            {"ensemble", PipelineKind::Ensemble},
                            {"near_far", PipelineKind::NearFar}});
      if (ps.kind == PipelineKind::Expert) {
        ps.expert = require_string(pj, "expert", p);
        if (!names.contains(ps.expert)) fail(p + ".expert", "no expert named '" + ps.expert + "'");
      } else {
        ps.ensemble = parse_ensemble(pj, p, cfg);
      }
      if (ps.kind == PipelineKind::NearFar) {
        if (!pj.contains("frequencies") || !pj.at("frequencies").is_array()) {
          fail(p + ".frequencies", "expected an array of positive integers");
        }
        for (const json& f : pj.at("frequencies")) {
          if (!f.is_number_integer() || f.get<int>() < 1) fail(p + ".frequencies", "expected positive integers");
          ps.frequencies.push_back(f.get<int>());
        }
        NearFarSpec nf{ps.ensemble, ps.frequencies};
        try {
          nf.validate();
        } catch (const Error& e) {
          fail(p, e.what());
        }
      }
      cfg.pipelines.push_back(std::move(ps));
    }
  }

  if (j.contains("frontier")) {
    const json& f = j.at("frontier");
    check_keys(f, {"experts", "infer_ranges"}, "$.frontier");
    FrontierSpec fs;
    if (!f.contains("experts") || !f.at("experts").is_array()) fail("$.frontier.experts", "expected an array");
    for (const json& e : f.at("experts")) {
      if (!e.is_string() || !names.contains(e.get<std::string>())) {
        fail("$.frontier.experts", "unknown expert " + e.dump());
      }
      fs.experts.push_back(e.get<std::string>());
    }
    if (f.contains("infer_ranges")) {
      if (!f.at("infer_ranges").is_array()) fail("$.frontier.infer_ranges", "expected an array");
      for (const json& r : f.at("infer_ranges")) {
        if (!r.is_number() || !(r.get<double>() > 0.0)) fail("$.frontier.infer_ranges", "expected positive numbers");
        fs.infer_ranges.push_back(r.get<double>());
      }
    }
    cfg.frontier = std::move(fs);
  }

  if (j.contains("output")) {
    check_keys(j.at("output"), {"dir"}, "$.output");
    cfg.output_dir = get_string(j.at("output"), "dir", "$.output", "");
  }
  if (cfg.pipelines.empty() && !cfg.frontier) fail("$.pipelines", "no pipelines and no frontier configured");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

std::vector<PipelineSpec> frontier_pipelines(const ExperimentConfig& config) {
  std::vector<PipelineSpec> out;
  if (!config.frontier) return out;
  for (const std::string& name : config.frontier->experts) {
    const RangeExpertConfig& base = config.expert(name);
    std::vector<double> ranges = config.frontier->infer_ranges;
    if (ranges.empty()) ranges.push_back(base.infer_range);
    for (double r : ranges) {
      PipelineSpec ps;
      ps.kind = PipelineKind::Expert;
      RangeExpertConfig e = base;
      e.infer_range = r;
      ps.name = name + " " + e.label();
      ps.expert = name;
      ps.ensemble.experts.push_back({e, RangeBand::everything()});
      out.push_back(std::move(ps));
    }
  }
  return out;
}

PipelineRun run_pipeline(const ExperimentConfig& config, const PipelineSpec& pipeline, const Scenario& scenario) {
  StreamView stream{scenario.sweeps, scenario.truth, config.sweeps_per_frame, scenario.annotation_range};
  PipelineRun run;
  run.name = pipeline.name;
  switch (pipeline.kind) {
    case PipelineKind::Expert: {
      EnsembleSpec single;
      if (!pipeline.ensemble.experts.empty()) {
        single.experts.push_back(pipeline.ensemble.experts.front());
      } else {
        single.experts.push_back({config.expert(pipeline.expert), RangeBand::everything()});
      }
      single.range_mode = config.match.range_mode;
      run.frames = run_range_ensemble(single, stream);
      break;
    }
    case PipelineKind::Ensemble:
      run.frames = run_range_ensemble(pipeline.ensemble, stream);
      break;
    case PipelineKind::NearFar:
      run.frames = run_near_far(NearFarSpec{pipeline.ensemble, pipeline.frequencies}, stream);
      break;
  }
  return run;
}

CohortReport evaluate_run(const ExperimentConfig& config, const PipelineRun& run, const Scenario& scenario) {
  std::vector<std::vector<Box3D>> dets;
  std::vector<StageTimings> timings;
  for (const NearFarFrame& f : run.frames) {
    dets.push_back(f.detections);
    timings.push_back(f.timings);
  }
  CohortReport report = evaluate_cohorts(dets, scenario.truth, config.bands, config.match);
  report.method = run.name;
  if (!timings.empty()) report.latency = latency_stats(timings);
  return report;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result;
  result.scenario = config.scenario ? generate_scenario(*config.scenario) : read_scenario(config.scenario_path);

  std::vector<PipelineSpec> pipelines = config.pipelines;
  if (options.include_frontier) {
    auto extra = frontier_pipelines(config);
    pipelines.insert(pipelines.end(), extra.begin(), extra.end());
  }

  result.runs.resize(pipelines.size());
  result.reports.resize(pipelines.size());
  const auto n = static_cast<std::int64_t>(pipelines.size());
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel && n > 1)
  for (std::int64_t k = 0; k < n; ++k) {
    result.runs[k] = run_pipeline(config, pipelines[k], result.scenario);
    result.reports[k] = evaluate_run(config, result.runs[k], result.scenario);
  }
  return result;
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "detections");
  write_file_atomic(dir / "report.json", emit_report(result.reports, ReportFormat::Json));
  write_file_atomic(dir / "report.csv", emit_report(result.reports, ReportFormat::Csv));
  std::vector<double> timestamps;
  for (const Sweep& s : result.scenario.sweeps) timestamps.push_back(s.timestamp);
  for (std::size_t k = 0; k < result.runs.size(); ++k) {
    std::vector<std::vector<Box3D>> dets;
    for (const NearFarFrame& f : result.runs[k].frames) dets.push_back(f.detections);
    std::string file;
    for (char c : result.runs[k].name) file += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    file += ".ndjson";
    write_file_atomic(dir / "detections" / file, boxes_to_ndjson(dets, timestamps));
  }
}

}  // namespace rangeforge
