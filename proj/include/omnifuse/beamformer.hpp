#pragma once

// Delay-and-sum beamforming of array snapshots onto an azimuth-elevation grid.

#include <filesystem>
#include <vector>

#include "omnifuse/raster.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

inline constexpr double kDefaultFloorDb = -120.0;
inline constexpr double kDefaultDynamicRangeDb = 30.0;

/// Azimuth-elevation sampling grid, bounds inclusive. Columns run from az_min
/// to az_max; rows run from el_max (row 0) down to el_min, so a heatmap reads
/// like an image.
struct AngleGrid {
  double az_min_deg = -45.0;
  double az_max_deg = 45.0;
  int az_steps = 91;
  double el_min_deg = -30.0;
  double el_max_deg = 30.0;
  int el_steps = 61;

  /// Throws InputError on min >= max, steps < 2 or bounds outside (-90, 90).
  void validate() const;

  double az_step() const noexcept { return (az_max_deg - az_min_deg) / (az_steps - 1); }
  double el_step() const noexcept { return (el_max_deg - el_min_deg) / (el_steps - 1); }
  double azimuth(int col) const noexcept { return az_min_deg + col * az_step(); }
  double elevation(int row) const noexcept { return el_max_deg - row * el_step(); }
  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(az_steps) * static_cast<std::size_t>(el_steps);
  }

  /// Continuous (col, row) of an arbitrary direction; pixel centres of the
  /// heatmap image sit at integer + 0.5.
  Point2 to_pixel(double azimuth_deg, double elevation_deg) const noexcept;
  double azimuth_at_pixel(double px) const noexcept { return az_min_deg + (px - 0.5) * az_step(); }
  double elevation_at_pixel(double py) const noexcept { return el_max_deg - (py - 0.5) * el_step(); }

  friend bool operator==(const AngleGrid&, const AngleGrid&) = default;
};

struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Beamformed power in dB, (el_steps x az_steps), every value >= floor_db.
struct Heatmap {
  AngleGrid grid;
  double floor_db = kDefaultFloorDb;
  std::vector<double> values_db;

  double at(int row, int col) const noexcept {
    return values_db[static_cast<std::size_t>(row) * grid.az_steps + col];
  }
  double max_db() const noexcept;
  GridCell argmax() const noexcept;  // first maximum in row-major order
};

/// Precomputed unit steering weights exp(-j*phase) for one (geometry, grid)
/// pair. Immutable after construction; share freely across threads.
class SteeringTable {
 public:
  SteeringTable(const ArrayGeometry& geometry, const AngleGrid& grid);

  const AngleGrid& grid() const noexcept { return grid_; }
  std::size_t element_count() const noexcept { return elements_; }

  /// Cached beamforming: one complex multiply-accumulate per (cell, element).
  Heatmap beamform(const ArraySnapshot& snapshot, double floor_db = kDefaultFloorDb) const;

 private:
  AngleGrid grid_;
  std::size_t elements_;
  std::vector<double> weight_re_;  // cell-major, element-minor
  std::vector<double> weight_im_;
};

/// Direct delay-and-sum evaluation: steering phases are recomputed for every
/// cell. Value per cell is 20*log10|sum_k s_k * exp(-j*phase_k)|, clamped
/// below at floor_db.
Heatmap beamform(const ArraySnapshot& snapshot, const ArrayGeometry& geometry, const AngleGrid& grid,
                 double floor_db = kDefaultFloorDb);

/// Maps dB to [0, 1]: clamp((v - (max - range)) / range, 0, 1). A heatmap
/// that sits entirely on its floor yields all zeros. Output is az_steps wide
/// and el_steps tall, in heatmap row order.
ScalarImage normalize(const Heatmap& heatmap, double dynamic_range_db = kDefaultDynamicRangeDb);

/// Portable float map ("Pf", little-endian) of the raw dB values.
void save_heatmap_pfm(const Heatmap& heatmap, const std::filesystem::path& path);
Heatmap load_heatmap_pfm(const std::filesystem::path& path, const AngleGrid& grid, double floor_db);
/// 16-bit grayscale PNG of the normalized heatmap.
void save_heatmap_png16(const Heatmap& heatmap, double dynamic_range_db, const std::filesystem::path& path);

}  // namespace omnifuse
