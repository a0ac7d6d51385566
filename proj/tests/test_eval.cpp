#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rangeforge/eval.hpp"

using namespace rangeforge;

namespace {

Box3D at(double x, double y, double score = 1.0, int cls = 0) {
  Box3D b;
  b.center = {x, y, 0};
  b.dims = {4, 2, 1.5};
  b.score = score;
  b.class_id = cls;
  return b;
}

std::vector<ScoredFlag> flags(std::initializer_list<std::pair<double, bool>> list) {
  std::vector<ScoredFlag> out;
  for (auto [s, tp] : list) out.push_back({s, tp});
  return out;
}

const std::vector<RangeBand> kWhole = {RangeBand::everything()};

}  // namespace

TEST_CASE("match_frame examples") {
  const std::vector<Box3D> gt = {at(10, 0)};
  CHECK(match_frame(std::vector<Box3D>{at(10, 0, 0.9)}, gt, 2.0).is_tp == std::vector<bool>{true});

  const Matching far = match_frame(std::vector<Box3D>{at(13, 0, 0.9)}, gt, 2.0);
  CHECK(far.is_tp == std::vector<bool>{false});
  CHECK(far.pairs.empty());

  const std::vector<Box3D> two = {at(11.5, 0, 0.9), at(10.1, 0, 0.8)};
  const Matching m = match_frame(two, gt, 2.0);
  CHECK(m.is_tp == std::vector<bool>{true, false});
  REQUIRE(m.pairs.size() == 1);
  CHECK(std::get<2>(m.pairs[0]) == doctest::Approx(1.5));

  // Other classes never match.
  CHECK(match_frame(std::vector<Box3D>{at(10, 0, 0.9, 1)}, gt, 2.0).is_tp == std::vector<bool>{false});
}

TEST_CASE("match_frame agrees with exhaustive assignment search") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto micro = oracle::micro_scenario(rng);
    for (std::size_t f = 0; f < micro.dets.size(); ++f) {
      for (double thresh : {0.5, 1.0, 2.0}) {
        const Matching m = match_frame(micro.dets[f], micro.gts[f], thresh);
        const auto ref = oracle::match(micro.dets[f], micro.gts[f], thresh);
        for (std::size_t d = 0; d < ref.size(); ++d) CHECK(m.is_tp[d] == (ref[d] >= 0));
        for (const auto& [d, g, dist] : m.pairs) CHECK(ref[d] == static_cast<int>(g));
      }
    }
  }
}

TEST_CASE("matching ignores input order when scores are distinct") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box3D> dets, gts;
    for (int k = 0; k < 6; ++k) dets.push_back(at(u(rng), u(rng), 0.1 + 0.1 * k));
    for (int k = 0; k < 4; ++k) gts.push_back(at(u(rng), u(rng)));
    const Matching base = match_frame(dets, gts, 2.0);
    std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Box3D> shuffled;
    for (std::size_t p : perm) shuffled.push_back(dets[p]);
    const Matching again = match_frame(shuffled, gts, 2.0);
    for (std::size_t k = 0; k < perm.size(); ++k) CHECK(again.is_tp[k] == base.is_tp[perm[k]]);
  }
}

TEST_CASE("average_precision examples") {
  CHECK(*average_precision(flags({{0.9, true}, {0.8, true}}), 2) == doctest::Approx(1.0));
  CHECK(*average_precision({}, 3) == 0.0);
  CHECK_FALSE(average_precision(flags({{0.9, false}}), 0).has_value());

  const auto tft = flags({{0.9, true}, {0.8, false}, {0.7, true}});
  const std::vector<oracle::Flag> ref = {{0.9, true}, {0.8, false}, {0.7, true}};
  CHECK(std::abs(*average_precision(tft, 2) - oracle::ap(ref, 2, 101)) < 1e-9);
  // By hand: recall 0..0.5 at precision 1 (51 levels), 0.51..1 at 2/3 (50 levels).
  CHECK(*average_precision(tft, 2) == doctest::Approx((51.0 + 50.0 * 2.0 / 3.0) / 101.0));
}

TEST_CASE("average_precision agrees with the explicit PR curve") {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> n(0, 12), gt(1, 9);
  std::bernoulli_distribution b(0.5);
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<ScoredFlag> f;
    std::vector<oracle::Flag> g;
    const int count = n(rng);
    const int gts = gt(rng);
    int tps = 0;
    for (int k = 0; k < count; ++k) {
      const bool tp = tps < gts && b(rng);
      tps += tp;
      f.push_back({1.0 - 0.01 * k, tp});
      g.push_back({1.0 - 0.01 * k, tp});
    }
    for (int points : {11, 41, 101}) {
      CHECK(std::abs(*average_precision(f, static_cast<std::size_t>(gts), points) -
                     oracle::ap(g, static_cast<std::size_t>(gts), points)) < 1e-9);
    }
  }
}

TEST_CASE("tp_errors examples") {
  Box3D a = at(1, 2);
  a.yaw = 0.4;
  a.velocity = {1, 1};
  const std::vector<std::pair<Box3D, Box3D>> same = {{a, a}};
  const TpErrors z = tp_errors(same);
  CHECK(z.ate == 0.0);
  CHECK(z.ase == 0.0);
  CHECK(z.aoe == 0.0);
  CHECK(z.ave == 0.0);

  Box3D det = at(0, 0), gt = at(0, 0);
  det.dims = {4, 2, 2};
  gt.dims = {4, 2, 1};
  CHECK(tp_errors(std::vector<std::pair<Box3D, Box3D>>{{det, gt}}).ase == doctest::Approx(0.5));

  // Crossed footprints: overlap 2x2x1 = 4, union 8 + 8 - 4 = 12.
  CHECK(aligned_scale_error({4, 2, 1}, {2, 4, 1}) == doctest::Approx(1.0 - 4.0 / 12.0));

  det = at(0, 0);
  gt = at(0, 0);
  det.yaw = std::numbers::pi - 0.1;
  gt.yaw = -std::numbers::pi + 0.1;
  CHECK(tp_errors(std::vector<std::pair<Box3D, Box3D>>{{det, gt}}).aoe == doctest::Approx(0.2));

  const TpErrors none = tp_errors({});
  CHECK(none.no_matches);
  CHECK(none.ate == 2.0);
  CHECK(none.aoe == doctest::Approx(std::numbers::pi));
}

TEST_CASE("composite score examples") {
  TpErrors zero;
  CHECK(composite_score(0.5, zero, CompositeMetric::Cds) == doctest::Approx(0.5));
  TpErrors worst;
  worst.ate = 2;
  worst.ase = 1;
  worst.aoe = std::numbers::pi;
  CHECK(composite_score(1.0, worst, CompositeMetric::Cds) == doctest::Approx(0.0));
  TpErrors mid;
  mid.ate = 0.5;
  mid.ase = 0.2;
  mid.aoe = std::numbers::pi / 4;
  CHECK(composite_score(0.6, mid, CompositeMetric::Cds) == doctest::Approx(0.46).epsilon(1e-12));
  // Errors beyond the normalizer saturate.
  worst.ate = 10;
  CHECK(composite_score(1.0, worst, CompositeMetric::Cds) == doctest::Approx(0.0));
  CHECK(composite_score(1.0, zero, CompositeMetric::Nds) == doctest::Approx(0.9));
}

TEST_CASE("evaluate_cohorts agrees with the brute-force evaluator on micro-scenarios") {
  std::mt19937_64 rng(34);
  MatchSpec spec;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto micro = oracle::micro_scenario(rng);
    const CohortReport rep = evaluate_cohorts(micro.dets, micro.gts, kWhole, spec);
    REQUIRE(rep.bands.size() == 1);
    for (const ClassEval& c : rep.bands[0].classes) {
      const auto ref = oracle::evaluate_class(micro.dets, micro.gts, c.class_id, spec);
      CHECK(c.support == ref.support);
      CHECK(std::abs(c.ap - ref.ap) < 1e-9);
      CHECK(std::abs(c.ate - ref.ate) < 1e-9);
      CHECK(std::abs(c.ase - ref.ase) < 1e-9);
      CHECK(std::abs(c.aoe - ref.aoe) < 1e-9);
      CHECK(std::abs(c.cds - ref.cds) < 1e-9);
      CHECK(c.cds <= c.ap + 1e-15);
    }
  }
}

TEST_CASE("perfect detections score 1 in every supported band") {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(-140, 140);
  std::vector<std::vector<Box3D>> gts(4);
  for (auto& f : gts) {
    for (int k = 0; k < 15; ++k) {
      Box3D b = at(u(rng), u(rng), 1.0, k % 3);
      b.velocity = {1, 0};
      f.push_back(b);
    }
  }
  const std::vector<RangeBand> bands = {{0, 50}, {50, 100}, {100, 150}};
  const CohortReport rep = evaluate_cohorts(gts, gts, bands);
  CHECK(rep.bands.size() == 4);
  for (const BandEval& b : rep.bands) {
    if (!b.has_support) continue;
    CHECK(b.aggregate.ap == doctest::Approx(1.0));
    CHECK(b.aggregate.cds == doctest::Approx(1.0));
    CHECK(b.aggregate.nds == doctest::Approx(0.9));
  }
  CHECK(rep.bands[3].band == RangeBand(0, 150));
}

TEST_CASE("single whole band equals whole-scene evaluation") {
  std::mt19937_64 rng(36);
  MatchSpec spec;
  for (int trial = 0; trial < 200; ++trial) {
    const auto micro = oracle::micro_scenario(rng);
    const CohortReport a = evaluate_cohorts(micro.dets, micro.gts, kWhole, spec);
    const std::vector<RangeBand> wide = {RangeBand(0, 1e9)};
    const CohortReport b = evaluate_cohorts(micro.dets, micro.gts, wide, spec);
    CHECK(a.bands[0].classes == b.bands[0].classes);
  }
}

TEST_CASE("AP is a rank statistic") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 300; ++trial) {
    auto micro = oracle::micro_scenario(rng);
    const CohortReport a = evaluate_cohorts(micro.dets, micro.gts, kWhole);
    for (auto& f : micro.dets) {
      for (Box3D& d : f) d.score = 0.05 + 0.9 * d.score * d.score;
    }
    const CohortReport b = evaluate_cohorts(micro.dets, micro.gts, kWhole);
    REQUIRE(a.bands[0].classes.size() == b.bands[0].classes.size());
    for (std::size_t c = 0; c < a.bands[0].classes.size(); ++c) {
      CHECK(a.bands[0].classes[c].ap == b.bands[0].classes[c].ap);
    }
  }
}

TEST_CASE("CDS equals AP exactly when errors vanish") {
  std::vector<std::vector<Box3D>> gts = {{at(5, 5), at(20, 0)}};
  std::vector<std::vector<Box3D>> dets = {{at(5, 5, 0.9), at(40, 0, 0.95)}};
  const CohortReport rep = evaluate_cohorts(dets, gts, kWhole);
  const ClassEval& c = rep.bands[0].classes[0];
  CHECK(c.ap < 1.0);
  CHECK(c.cds == c.ap);
}

TEST_CASE("band TP counts add up when no match crosses a band edge") {
  std::mt19937_64 rng(38);
  std::uniform_real_distribution<double> r_in(2, 46), r_mid(54, 96), r_out(104, 146), th(0, 2 * M_PI), n(-0.3, 0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<Box3D>> gts(2), dets(2);
    for (std::size_t f = 0; f < 2; ++f) {
      for (int k = 0; k < 12; ++k) {
        const double r = k % 3 == 0 ? r_in(rng) : (k % 3 == 1 ? r_mid(rng) : r_out(rng));
        const double a = th(rng);
        Box3D g = at(r * std::cos(a), r * std::sin(a), 1.0, k % 2);
        gts[f].push_back(g);
        if (k % 4 == 0) continue;
        Box3D d = g;
        d.center.x() += n(rng);
        d.center.y() += n(rng);
        d.score = 0.5 + 0.01 * k;
        dets[f].push_back(d);
      }
    }
    const std::vector<RangeBand> bands = {{0, 50}, {50, 100}, {100, 150}};
    const CohortReport banded = evaluate_cohorts(dets, gts, bands);
    const CohortReport whole = evaluate_cohorts(dets, gts, kWhole);
    std::size_t sum = 0;
    for (std::size_t b = 0; b < 3; ++b) sum += banded.bands[b].aggregate.true_positives;
    CHECK(sum == whole.bands[0].aggregate.true_positives);
  }
}

TEST_CASE("classes without GT support are excluded, not scored") {
  std::vector<std::vector<Box3D>> gts = {{at(5, 5, 1.0, 0)}};
  std::vector<std::vector<Box3D>> dets = {{at(5, 5, 0.9, 0), at(9, 9, 0.9, 2)}};
  const CohortReport rep = evaluate_cohorts(dets, gts, kWhole);
  CHECK(rep.bands[0].classes.size() == 1);
  CHECK(rep.bands[0].excluded_classes == std::vector<int>{2});

  const std::vector<RangeBand> bands = {{0, 50}, {50, 100}};
  const CohortReport empty_band = evaluate_cohorts(dets, gts, bands);
  CHECK_FALSE(empty_band.bands[1].has_support);
}

TEST_CASE("evaluate_cohorts rejects malformed input") {
  const std::vector<std::vector<Box3D>> one(1), two(2);
  CHECK_THROWS_AS(evaluate_cohorts(one, two, kWhole), Error);
  CHECK_THROWS_AS(evaluate_cohorts(one, one, std::vector<RangeBand>{}), Error);
  MatchSpec bad;
  bad.thresholds = {2.0, 1.0};
  CHECK_THROWS_AS(evaluate_cohorts(one, one, kWhole, bad), Error);
}

TEST_CASE("latency_stats examples") {
  const std::vector<StageTimings> flat(5, StageTimings{4, 3, 2, 1, 0});
  const LatencyStats a = latency_stats(flat);
  CHECK(a.mean_ms == doctest::Approx(10.0));
  CHECK(a.std_ms == doctest::Approx(0.0));
  CHECK(a.stage_means.point_proc == doctest::Approx(4.0));

  const std::vector<StageTimings> two = {{5, 0, 0, 0, 0}, {15, 0, 0, 0, 0}};
  const LatencyStats b = latency_stats(two);
  CHECK(b.mean_ms == doctest::Approx(10.0));
  CHECK(b.std_ms == doctest::Approx(5.0));
  CHECK_THROWS_AS(latency_stats(std::vector<StageTimings>{}), Error);
}
