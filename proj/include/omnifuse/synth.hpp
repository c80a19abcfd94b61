#pragma once

// Synthetic scenes: an RGB camera and co-located array/thermal sensors
// looking at moving point targets. Every sensor's data is generated through
// its calibration, so a correct pipeline puts each target's sensor peak on
// the target's box in the RGB frame.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnifuse/audio.hpp"
#include "omnifuse/beamformer.hpp"
#include "omnifuse/imaging.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

struct SceneSensor {
  std::string sensor_id;
  SensorKind kind = SensorKind::microphone_array;
  // Arrays.
  int elements = 6;
  double radius_m = 0.0;  // 0 picks a default for the kind
  double wavelength_m = 0.0039;  // radar carrier
  double snr_db = 20.0;
  // Microphones.
  double tone_hz = 4000.0;
  double sample_rate = 48000.0;
  int block = 960;
  // Thermal.
  int width = 160;
  int height = 120;
  double ambient_c = 22.0;
  double noise_std = 0.3;
  // Mounting offset relative to the camera, as a calibration perturbation.
  double rotation_deg = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  ColormapName colormap = ColormapName::spectral_jet;
  double alpha = 1.0;
};

struct SceneTarget {
  std::string name = "target";
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double azimuth_rate_deg_s = 0.0;
  double elevation_rate_deg_s = 0.0;
  int box_width = 64;
  int box_height = 64;
  double sound = 1.0;
  double radar = 1.0;
  double temperature_c = 45.0;
  std::array<std::uint8_t, 3> color{30, 30, 30};
};

struct Scene {
  std::int64_t frames = 0;
  double fps = 10.0;
  int width = 640;
  int height = 480;
  std::string task = "locate the target";
  std::string prompt = "target";
  /// Camera field of view; also the beamforming grid of every array.
  AngleGrid field_of_view;
  std::vector<SceneSensor> sensors;
  std::vector<SceneTarget> targets;
};

/// Syntax errors carry a line number; schema errors name the offending field.
Scene scene_from_json_text(std::string_view text);
Scene load_scene(const std::filesystem::path& path);

struct TargetTruth {
  std::string name;
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  Point2 centroid_px;
  CropRect box;  // clipped to the frame
};

/// Camera model shared by every generator: beamforming-grid pixel -> RGB pixel.
CalibrationTransform camera_calibration(const AngleGrid& fov, int width, int height);
/// True calibration of a scene sensor (camera model plus mounting offset).
CalibrationTransform sensor_calibration(const Scene& scene, const SceneSensor& sensor);
Point2 direction_to_pixel(const Scene& scene, double azimuth_deg, double elevation_deg);
std::vector<TargetTruth> targets_at(const Scene& scene, std::int64_t frame_idx);
Bitmap truth_mask(const Scene& scene, std::span<const TargetTruth> targets);

ArrayGeometry scene_geometry(const SceneSensor& sensor);

/// Multichannel block of a tone arriving from each source plus white
/// Gaussian noise of standard deviation `noise_std` per sample. Channel k of
/// a source carries cos(2*pi*f*n/fs + phase_k + offset), so the DFT bin of
/// the tone matches the simulated snapshot of the same scene.
AudioBlock synthesize_tone_block(const ArrayGeometry& geometry, std::span<const PointSource> sources, double tone_hz,
                                 double sample_rate, int samples, double noise_std, std::uint64_t seed);
/// Per-sample noise for the requested SNR of a tone of `amplitude`.
double tone_noise_std(double amplitude, double snr_db);

/// Sources as seen by an array sensor at one frame.
std::vector<PointSource> sensor_sources(const Scene& scene, const SceneSensor& sensor,
                                        std::span<const TargetTruth> targets);

RgbImage render_rgb(const Scene& scene, std::span<const TargetTruth> targets, std::uint64_t seed);
ThermalFrame render_thermal(const Scene& scene, const SceneSensor& sensor, std::span<const TargetTruth> targets,
                            std::uint64_t seed);

/// Derives independent stream seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Writes manifest, frames, masks/, calib/, geometry/, config.json and
/// truth.json into `out_dir`. Bit-identical for equal (scene, seed).
void make_synthetic_dataset(const Scene& scene, const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace omnifuse
