#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "rangeforge/geometry.hpp"

namespace rangeforge {

enum class RangeMode { BevL2, BevLinf };

/// Half-open radial interval [inner, outer). `outer` may be +infinity.
class RangeBand {
 public:
  RangeBand(double inner, double outer);

  static RangeBand everything() { return {0.0, std::numeric_limits<double>::infinity()}; }

  double inner() const { return inner_; }
  double outer() const { return outer_; }
  bool contains(double range) const { return range >= inner_ && range < outer_; }

  bool operator==(const RangeBand&) const = default;

 private:
  double inner_;
  double outer_;
};

double radial_range(double x, double y, RangeMode mode);
double radial_range(const Point& p, RangeMode mode);
double radial_range(const Eigen::Vector3d& p, RangeMode mode);

/// Keeps points with inner <= range < outer, preserving order.
PointCloud donut_crop(std::span<const Point> cloud, const RangeBand& band,
                      RangeMode mode = RangeMode::BevL2);

/// Keeps boxes whose center range lies in the band, preserving order.
std::vector<Box3D> filter_detections_by_band(std::span<const Box3D> dets, const RangeBand& band,
                                             RangeMode mode = RangeMode::BevL2);

/// Pillar cell (row i along x, column j along y).
struct CellIndex {
  std::int32_t i = 0;
  std::int32_t j = 0;
  auto operator<=>(const CellIndex&) const = default;
};

/// Occupied pillars of a square BEV grid spanning [-r, r)^2 with s cells per
/// meter. `cells` is sorted by (i, j) and holds only non-empty cells.
struct SparsePillarGrid {
  double range = 0.0;
  double voxel_reciprocal = 0.0;
  std::int64_t side = 0;
  std::vector<std::pair<CellIndex, std::uint32_t>> cells;

  std::size_t occupied() const { return cells.size(); }
  std::uint64_t total_points() const;
  double cell_area_count() const { return static_cast<double>(side) * static_cast<double>(side); }
  /// BEV coordinates of the cell center.
  Eigen::Vector2d cell_center(CellIndex c) const;

  bool operator==(const SparsePillarGrid&) const = default;
};

/// round(2 r s).
std::int64_t grid_side(double range, double voxel_reciprocal);

/// Reference voxelizer: one pass, ordered-map accumulation.
SparsePillarGrid voxelize_serial(std::span<const Point> cloud, double range, double voxel_reciprocal);
/// OpenMP voxelizer: parallel cell-key computation, sort, run-length count.
/// Produces the same grid as voxelize_serial for any thread count.
SparsePillarGrid voxelize_parallel(std::span<const Point> cloud, double range, double voxel_reciprocal);
/// Dispatches to the parallel kernel.
SparsePillarGrid voxelize(std::span<const Point> cloud, double range, double voxel_reciprocal);

struct RingOccupancy {
  RangeBand band;
  double occupied_fraction = 0.0;
  std::uint64_t cells_in_ring = 0;
  std::uint64_t occupied_in_ring = 0;
  /// True when no grid cell center falls in the ring.
  bool empty_ring = false;
};

std::vector<RingOccupancy> occupancy_by_ring_serial(const SparsePillarGrid& grid, double ring_width);
std::vector<RingOccupancy> occupancy_by_ring_parallel(const SparsePillarGrid& grid, double ring_width);
std::vector<RingOccupancy> occupancy_by_ring(const SparsePillarGrid& grid, double ring_width);

}  // namespace rangeforge
