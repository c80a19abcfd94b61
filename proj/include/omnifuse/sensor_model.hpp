#pragma once

// Array geometry, frame types and the synthetic far-field scene simulator.
//
// Angles are degrees at every public boundary. Azimuth rotates about the
// vertical axis (positive toward +x), elevation tilts toward +y. Arrays are
// planar (z = 0) and narrowband: one wavelength per geometry.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace omnifuse {

using Complex = std::complex<double>;

/// Monotonic timestamp in nanoseconds.
using TimestampNs = std::int64_t;

enum class SensorKind { mmwave_radar, microphone_array, thermal };

const char* to_string(SensorKind kind) noexcept;
SensorKind sensor_kind_from_string(std::string_view name);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Element positions (meters) and operating wavelength of a phased array.
class ArrayGeometry {
 public:
  /// Throws GeometryError unless there are >= 2 finite, pairwise distinct
  /// elements and wavelength > 0, or if `kind` is thermal.
  ArrayGeometry(std::vector<Point2> elements, double wavelength_m, SensorKind kind);

  const std::vector<Point2>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  double wavelength() const noexcept { return wavelength_; }
  SensorKind kind() const noexcept { return kind_; }

  /// Same element layout at a different wavelength.
  ArrayGeometry with_wavelength(double wavelength_m) const;

 private:
  std::vector<Point2> elements_;
  double wavelength_;
  SensorKind kind_;
};

/// One frame of complex per-element samples.
struct ArraySnapshot {
  std::string geometry_id;
  std::vector<Complex> samples;
  TimestampNs timestamp = 0;

  /// Throws InputError if the sample count differs from the geometry or a
  /// component is non-finite.
  void validate_against(const ArrayGeometry& geometry) const;
};

struct PointSource {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double amplitude = 1.0;
  double phase_offset_rad = 0.0;
};

/// Infrared intensity raster, row-major.
struct ThermalFrame {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  TimestampNs timestamp = 0;

  void validate() const;
};

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) noexcept { return deg * (kPi / 180.0); }
constexpr double rad_to_deg(double rad) noexcept { return rad * (180.0 / kPi); }

/// Far-field steering phase of one element, in radians:
/// (2*pi / wavelength) * (x * cos(el) * sin(az) + y * sin(el)).
double steering_phase(const ArrayGeometry& geometry, std::size_t element_index,
                      double azimuth_deg, double elevation_deg);

/// Same formula on raw values; shared by the simulator and the beamformer so
/// both evaluate bit-identical phases.
double steering_phase(Point2 element, double wavelength_m, double azimuth_rad,
                      double elevation_rad) noexcept;

/// K elements evenly spaced on a circle; element 0 at (radius, 0).
ArrayGeometry circular_array(int num_elements, double radius_m, double wavelength_m,
                             SensorKind kind = SensorKind::microphone_array);

/// Sum of plane waves plus circularly symmetric complex Gaussian noise with
/// E|n|^2 = noise_std^2. Deterministic for a fixed seed.
ArraySnapshot simulate_snapshot(const ArrayGeometry& geometry, std::span<const PointSource> sources,
                                double noise_std, std::uint64_t seed);

/// Noise standard deviation giving the requested per-element SNR for a source
/// of the given amplitude.
double noise_std_for_snr(double amplitude, double snr_db);

// Geometry file: {"sensor_kind", "wavelength_m", "elements": [[x, y], ...]}.
ArrayGeometry load_geometry(const std::filesystem::path& path);
ArrayGeometry geometry_from_json_text(std::string_view text);
std::string geometry_to_json_text(const ArrayGeometry& geometry);
void save_geometry(const ArrayGeometry& geometry, const std::filesystem::path& path);

// Snapshot file: "OMNISNAP", u32 K, K x (f64 re, f64 im), i64 timestamp_ns.
// All little-endian.
std::vector<std::uint8_t> encode_snapshot(const ArraySnapshot& snapshot);
ArraySnapshot decode_snapshot(std::span<const std::uint8_t> bytes);
void save_snapshot(const ArraySnapshot& snapshot, const std::filesystem::path& path);
ArraySnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace omnifuse
