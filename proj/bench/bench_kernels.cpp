// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "rangeforge/detector.hpp"
#include "rangeforge/range_ops.hpp"
#include "rangeforge/scenario.hpp"

using namespace rangeforge;

namespace {

const Scenario& scenario() {
  static const Scenario sc = [] {
    ScenarioSpec spec;
    spec.n_frames = 5;
    spec.n_objects = 200;
    return generate_scenario(spec);
  }();
  return sc;
}

const PointCloud& cloud() {
  static const PointCloud c = aggregate_sweeps(scenario().sweeps, 5);
  return c;
}

template <auto Kernel>
void BM_Voxelize(benchmark::State& state) {
  const double s = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(cloud(), 150.0, s));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud().size()));
}

template <auto Kernel>
void BM_RingOccupancy(benchmark::State& state) {
  const SparsePillarGrid grid = voxelize_serial(cloud(), 150.0, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(grid, 10.0));
}

template <auto Kernel>
void BM_PointsInBoxes(benchmark::State& state) {
  const auto& boxes = scenario().truth.back();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(boxes, cloud()));
}

}  // namespace

BENCHMARK(BM_Voxelize<voxelize_serial>)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Voxelize<voxelize_parallel>)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RingOccupancy<occupancy_by_ring_serial>)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RingOccupancy<occupancy_by_ring_parallel>)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PointsInBoxes<points_in_boxes_serial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PointsInBoxes<points_in_boxes_parallel>)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
