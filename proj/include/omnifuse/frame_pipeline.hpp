#pragma once

// Per-frame processing bound to a set of configured sensors: payload ->
// sensor image -> calibrated RGB-frame image -> mask-gated blend. Batch,
// stream and bench runs and the in-process bindings all go through here.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omnifuse/beamformer.hpp"
#include "omnifuse/config.hpp"
#include "omnifuse/dataset.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/imaging.hpp"

namespace omnifuse {

struct StageTimes {
  double sensor_ms = 0.0;     // beamforming or thermal normalization
  double colorize_ms = 0.0;
  double calibrate_ms = 0.0;
  double blend_ms = 0.0;
};

/// Calibrated sensor image for one frame, before blending.
struct SensorImage {
  std::string sensor_id;
  Calibrated<RgbImage> calibrated;
  /// Strongest reading (heatmap peak cell or hottest pixel) in RGB pixels.
  Point2 peak_px;
  std::optional<Heatmap> heatmap;
  double wavelength_m = 0.0;
  TimestampNs timestamp = 0;
};

class FramePipeline {
 public:
  /// Validates the sensors the same way as a run config; every calibration
  /// must target the same frame size.
  explicit FramePipeline(std::vector<SensorConfig> sensors);
  explicit FramePipeline(const RunConfig& config) : FramePipeline(config.sensors) {}
  static FramePipeline from_config_file(const std::filesystem::path& path);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<SensorConfig>& sensors() const noexcept { return sensors_; }
  const SensorConfig& sensor(const std::string& sensor_id) const;  // InputError

  /// Heatmap for one snapshot at the sensor's configured wavelength.
  Heatmap beamform_frame(const std::string& sensor_id, std::span<const Complex> samples) const;

  /// Turns a raw payload into a calibrated sensor image. Errors name the
  /// sensor.
  SensorImage render(const std::string& sensor_id, const SensorPayload& payload, StageTimes* times = nullptr) const;

  SensorMaskedImage fuse(const SensorImage& image, const RgbImage& rgb, const SegMask& mask,
                         StageTimes* times = nullptr) const;

  /// Synchronous fusion of one frame: one output per payload, in payload
  /// order. `masks` holds one 0/1 matrix per sensor; `alpha` overrides the
  /// configured value per sensor.
  std::map<std::string, RgbImage> fuse_frame(const RgbImage& rgb, const std::map<std::string, SensorPayload>& payloads,
                                             const std::map<std::string, Bitmap>& masks,
                                             const std::map<std::string, double>& alpha = {}) const;

 private:
  std::shared_ptr<const SteeringTable> table_for(const SensorConfig& sensor, double wavelength) const;
  SensorImage render_array(const SensorConfig& sensor, const ArraySnapshot& snapshot, double wavelength,
                           StageTimes* times) const;

  std::vector<SensorConfig> sensors_;
  std::map<std::string, Colormap> colormaps_;
  int width_ = 0;
  int height_ = 0;
  mutable std::mutex tables_mutex_;
  mutable std::map<std::pair<std::string, double>, std::shared_ptr<const SteeringTable>> tables_;
};

}  // namespace omnifuse
