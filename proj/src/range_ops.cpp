#include "rangeforge/range_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace rangeforge {

RangeBand::RangeBand(double inner, double outer) : inner_(inner), outer_(outer) {
  if (!(inner >= 0.0) || !std::isfinite(inner) || !(outer > inner)) {
    throw Error("RangeBand: need 0 <= inner < outer");
  }
}

double radial_range(double x, double y, RangeMode mode) {
  switch (mode) {
    case RangeMode::BevL2:
      return std::hypot(x, y);
    case RangeMode::BevLinf:
      return std::max(std::abs(x), std::abs(y));
  }
  return 0.0;
}

double radial_range(const Point& p, RangeMode mode) { return radial_range(p.x, p.y, mode); }

double radial_range(const Eigen::Vector3d& p, RangeMode mode) { return radial_range(p.x(), p.y(), mode); }

PointCloud donut_crop(std::span<const Point> cloud, const RangeBand& band, RangeMode mode) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point& p : cloud) {
    if (band.contains(radial_range(p, mode))) out.push_back(p);
  }
  return out;
}

std::vector<Box3D> filter_detections_by_band(std::span<const Box3D> dets, const RangeBand& band,
                                             RangeMode mode) {
  std::vector<Box3D> out;
  for (const Box3D& b : dets) {
    if (band.contains(radial_range(b.center, mode))) out.push_back(b);
  }
  return out;
}

std::uint64_t SparsePillarGrid::total_points() const {
  std::uint64_t n = 0;
  for (const auto& [cell, count] : cells) n += count;
  return n;
}

Eigen::Vector2d SparsePillarGrid::cell_center(CellIndex c) const {
  return {(c.i + 0.5) / voxel_reciprocal - range, (c.j + 0.5) / voxel_reciprocal - range};
}

std::int64_t grid_side(double range, double voxel_reciprocal) {
  if (!(range > 0.0) || !(voxel_reciprocal > 0.0)) {
    throw Error("voxelize: range and voxel reciprocal must be positive");
  }
  return std::llround(2.0 * range * voxel_reciprocal);
}

namespace {

constexpr std::int64_t kDropped = -1;

// Linear cell key i * side + j, or kDropped for points outside [-r, r)^2.
std::int64_t cell_key(const Point& p, double range, double s, std::int64_t side) {
  const double fi = std::floor((p.x + range) * s);
  const double fj = std::floor((p.y + range) * s);
  const auto limit = static_cast<double>(side);
  if (!(fi >= 0.0 && fi < limit && fj >= 0.0 && fj < limit)) return kDropped;
  return static_cast<std::int64_t>(fi) * side + static_cast<std::int64_t>(fj);
}

CellIndex key_to_cell(std::int64_t key, std::int64_t side) {
  return {static_cast<std::int32_t>(key / side), static_cast<std::int32_t>(key % side)};
}

}  // namespace

SparsePillarGrid voxelize_serial(std::span<const Point> cloud, double range, double voxel_reciprocal) {
  SparsePillarGrid grid;
  grid.range = range;
  grid.voxel_reciprocal = voxel_reciprocal;
  grid.side = grid_side(range, voxel_reciprocal);

  std::map<std::int64_t, std::uint32_t> counts;
  for (const Point& p : cloud) {
    const std::int64_t key = cell_key(p, range, voxel_reciprocal, grid.side);
    if (key != kDropped) ++counts[key];
  }
  grid.cells.reserve(counts.size());
  for (const auto& [key, n] : counts) grid.cells.emplace_back(key_to_cell(key, grid.side), n);
  return grid;
}

SparsePillarGrid voxelize_parallel(std::span<const Point> cloud, double range, double voxel_reciprocal) {
  SparsePillarGrid grid;
  grid.range = range;
  grid.voxel_reciprocal = voxel_reciprocal;
  grid.side = grid_side(range, voxel_reciprocal);

  const auto n = static_cast<std::int64_t>(cloud.size());
  std::vector<std::int64_t> keys(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    keys[k] = cell_key(cloud[k], range, voxel_reciprocal, grid.side);
  }

  std::sort(keys.begin(), keys.end());
  auto it = std::upper_bound(keys.begin(), keys.end(), kDropped);
  while (it != keys.end()) {
    auto run_end = std::upper_bound(it, keys.end(), *it);
    grid.cells.emplace_back(key_to_cell(*it, grid.side), static_cast<std::uint32_t>(run_end - it));
    it = run_end;
  }
  return grid;
}

SparsePillarGrid voxelize(std::span<const Point> cloud, double range, double voxel_reciprocal) {
  return voxelize_parallel(cloud, range, voxel_reciprocal);
}

namespace {

struct RingLayout {
  double width;
  std::size_t count;
};

RingLayout ring_layout(const SparsePillarGrid& grid, double ring_width) {
  if (!(ring_width > 0.0)) throw Error("occupancy_by_ring: ring width must be positive");
  // Farthest cell center is a corner cell.
  const Eigen::Vector2d corner = grid.cell_center({0, 0});
  const double max_dist = grid.side > 0 ? corner.norm() : 0.0;
  return {ring_width, static_cast<std::size_t>(std::floor(max_dist / ring_width)) + 1};
}

std::size_t ring_of(const SparsePillarGrid& grid, CellIndex c, double width) {
  return static_cast<std::size_t>(std::floor(grid.cell_center(c).norm() / width));
}

std::vector<RingOccupancy> assemble_rings(const RingLayout& layout, const std::vector<std::uint64_t>& total,
                                          const std::vector<std::uint64_t>& occupied) {
  std::vector<RingOccupancy> rings;
  rings.reserve(layout.count);
  for (std::size_t k = 0; k < layout.count; ++k) {
    RingOccupancy r{RangeBand(k * layout.width, (k + 1) * layout.width), 0.0, total[k], occupied[k],
                    total[k] == 0};
    if (total[k] > 0) r.occupied_fraction = static_cast<double>(occupied[k]) / static_cast<double>(total[k]);
    rings.push_back(r);
  }
  return rings;
}

}  // namespace

std::vector<RingOccupancy> occupancy_by_ring_serial(const SparsePillarGrid& grid, double ring_width) {
  const RingLayout layout = ring_layout(grid, ring_width);
  std::vector<std::uint64_t> total(layout.count, 0);
  std::vector<std::uint64_t> occupied(layout.count, 0);
  for (std::int64_t i = 0; i < grid.side; ++i) {
    for (std::int64_t j = 0; j < grid.side; ++j) {
      ++total[ring_of(grid, {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)}, layout.width)];
    }
  }
  for (const auto& [cell, count] : grid.cells) ++occupied[ring_of(grid, cell, layout.width)];
  return assemble_rings(layout, total, occupied);
}

std::vector<RingOccupancy> occupancy_by_ring_parallel(const SparsePillarGrid& grid, double ring_width) {
  const RingLayout layout = ring_layout(grid, ring_width);
  std::vector<std::uint64_t> total(layout.count, 0);
  std::vector<std::uint64_t> occupied(layout.count, 0);
  const auto n_cells = static_cast<std::int64_t>(grid.cells.size());

#pragma omp parallel
  {
    std::vector<std::uint64_t> local_total(layout.count, 0);
    std::vector<std::uint64_t> local_occupied(layout.count, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < grid.side; ++i) {
      for (std::int64_t j = 0; j < grid.side; ++j) {
        ++local_total[ring_of(grid, {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)}, layout.width)];
      }
    }
#pragma omp for schedule(static) nowait
    for (std::int64_t k = 0; k < n_cells; ++k) {
      ++local_occupied[ring_of(grid, grid.cells[k].first, layout.width)];
    }
#pragma omp critical(rangeforge_ring_merge)
    for (std::size_t k = 0; k < layout.count; ++k) {
      total[k] += local_total[k];
      occupied[k] += local_occupied[k];
    }
  }
  return assemble_rings(layout, total, occupied);
}

std::vector<RingOccupancy> occupancy_by_ring(const SparsePillarGrid& grid, double ring_width) {
  return occupancy_by_ring_parallel(grid, ring_width);
}

}  // namespace rangeforge
