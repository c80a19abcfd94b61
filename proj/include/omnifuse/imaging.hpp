#pragma once

// Sensor-plane rasters to RGB-frame-aligned color images: colormaps, thermal
// normalization and the one-time rotate/scale/translate/crop calibration.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "omnifuse/raster.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

enum class ColormapName { thermal_iron, spectral_jet, grayscale };

const char* to_string(ColormapName name) noexcept;
ColormapName colormap_from_string(std::string_view name);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class Colormap {
 public:
  explicit Colormap(ColormapName name);

  ColormapName name() const noexcept { return name_; }
  const Rgb& operator[](std::size_t i) const noexcept { return table_[i]; }
  const std::array<Rgb, 256>& table() const noexcept { return table_; }

  /// round(v * 255) for v in [0, 1].
  static std::size_t index_of(double v) noexcept;

 private:
  ColormapName name_;
  std::array<Rgb, 256> table_{};
};

/// Lookup of every value; throws InputError for values outside [0, 1].
RgbImage colorize(const ScalarImage& values, const Colormap& colormap);

/// clamp((v - t_lo) / (t_hi - t_lo), 0, 1); requires t_lo < t_hi.
ScalarImage normalize_thermal(const ThermalFrame& frame, double t_lo, double t_hi);

struct ThermalBounds {
  double lo = 0.0;
  double hi = 1.0;
};
/// Per-frame min/max, widened by one unit when the frame is constant.
ThermalBounds frame_bounds(const ThermalFrame& frame);

struct CropRect {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(int px, int py) const noexcept { return px >= x && py >= y && px < x + w && py < y + h; }
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

/// Maps a sensor image onto the RGB frame. With pixel centres at
/// integer + 0.5 and c_s, c_t the source and target image centres:
///
///   q = c_t + t + L (p - c_s),  L = S R  (or R S when scale_first)
///
/// R rotates clockwise on screen for positive degrees, S = diag(sx, sy).
/// Target pixels outside `crop` carry no data.
struct CalibrationTransform {
  std::string sensor_id;
  double rotation_deg = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  CropRect crop;
  int target_width = 0;
  int target_height = 0;
  /// Source raster size; 0 until known. Needed by map_point and invert.
  int source_width = 0;
  int source_height = 0;
  /// Linear part applies scale before rotation. Set on inverses of
  /// anisotropic transforms.
  bool scale_first = false;

  /// Throws InputError on non-positive scale, degenerate or out-of-bounds crop.
  void validate() const;
  static CalibrationTransform identity(int width, int height);
  /// Copy with the source size filled in.
  CalibrationTransform with_source(int width, int height) const;
};

Point2 map_point(const CalibrationTransform& transform, Point2 source_px);
Point2 unmap_point(const CalibrationTransform& transform, Point2 target_px);

/// Transform taking the target frame back onto the source raster.
CalibrationTransform invert(const CalibrationTransform& transform);

template <typename Raster>
struct Calibrated {
  Raster image;
  Bitmap validity;
};

/// Bilinear resampling onto the target frame. Pixels outside the crop or
/// the source footprint are black (zero) with validity 0. When
/// `source_validity` is given, a pixel is valid only if every contributing
/// source tap is valid.
Calibrated<RgbImage> calibrate(const RgbImage& sensor_image, const CalibrationTransform& transform,
                               const Bitmap* source_validity = nullptr);
Calibrated<ScalarImage> calibrate(const ScalarImage& sensor_field, const CalibrationTransform& transform,
                                  const Bitmap* source_validity = nullptr);

struct CalibrationRoundTrip {
  double max_point_error_px = 0.0;  // source -> target -> source
  int max_pixel_error = 0;          // gradient image through forward and inverse
  double coverage = 0.0;            // valid fraction of the target frame
};

/// Round-trip check of a calibration with a known source size.
CalibrationRoundTrip check_round_trip(const CalibrationTransform& transform);

// Calibration file: {sensor_id, rotation_deg, scale: [sx, sy],
// translate_px: [tx, ty], crop: [x, y, w, h], target: [w, h]} plus optional
// source: [w, h] and scale_first.
CalibrationTransform calibration_from_json_text(std::string_view text);
std::string calibration_to_json_text(const CalibrationTransform& transform);
CalibrationTransform load_calibration(const std::filesystem::path& path);
void save_calibration(const CalibrationTransform& transform, const std::filesystem::path& path);

}  // namespace omnifuse
