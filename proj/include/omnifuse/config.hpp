#pragma once

// Run configuration: one JSON file naming sensors, their geometry and
// calibration files, the mask provider and the run mode. Relative paths are
// resolved against the directory holding the config file.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnifuse/beamformer.hpp"
#include "omnifuse/imaging.hpp"
#include "omnifuse/mask_provider.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

enum class RunMode { batch, stream, bench };
const char* to_string(RunMode mode) noexcept;
RunMode run_mode_from_string(const std::string& text);  // ConfigError

struct SensorConfig {
  std::string sensor_id;
  SensorKind kind = SensorKind::thermal;
  // Arrays.
  std::filesystem::path geometry_path;
  std::optional<ArrayGeometry> geometry;
  AngleGrid grid;
  double floor_db = kDefaultFloorDb;
  double dynamic_range_db = kDefaultDynamicRangeDb;
  double speed_of_sound = 343.0;
  // Thermal.
  int thermal_width = 0;
  int thermal_height = 0;
  std::optional<double> thermal_lo;
  std::optional<double> thermal_hi;
  // Common.
  std::filesystem::path calibration_path;
  CalibrationTransform calibration;  // source size filled in
  ColormapName colormap = ColormapName::thermal_iron;
  double alpha = 1.0;

  bool is_array() const noexcept { return kind != SensorKind::thermal; }
  /// Width and height of the sensor-plane image (grid or thermal raster).
  int source_width() const noexcept { return is_array() ? grid.az_steps : thermal_width; }
  int source_height() const noexcept { return is_array() ? grid.el_steps : thermal_height; }
};

struct MaskProviderConfig {
  enum class Kind { stub, http };
  Kind kind = Kind::stub;
  std::string prompt;                  // stub
  std::filesystem::path mask_dir;      // stub
  std::string prompt_url;              // http
  std::string mask_url;                // http
  std::chrono::milliseconds refresh_period = kDefaultRefreshPeriod;
  std::chrono::milliseconds timeout = kDefaultBackendTimeout;
  bool per_frame = false;
};

struct BenchConfig {
  int frames = 200;
  int warmup = 20;
  int width = 640;
  int height = 480;
};

struct RunConfig {
  std::filesystem::path base_dir;
  std::string task;
  std::vector<SensorConfig> sensors;
  MaskProviderConfig mask_provider;
  std::filesystem::path input;
  std::filesystem::path output;
  RunMode mode = RunMode::batch;
  std::uint64_t seed = 0;
  BenchConfig bench;
  /// Effective settings with defaults filled in; echoed into run reports.
  nlohmann::json echo;

  const SensorConfig& sensor(const std::string& id) const;  // ConfigError
  /// Frame size shared by every calibration target.
  std::pair<int, int> target_size() const;
};

/// Syntax errors raise ParseError with a line number; everything else
/// (missing fields, bad values, missing files) raises ConfigError naming the
/// sensor or field.
RunConfig run_config_from_json_text(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Prompt and mask backends described by the config.
std::shared_ptr<PromptBackend> make_prompt_backend(const RunConfig& config);
std::shared_ptr<MaskBackend> make_mask_backend(const RunConfig& config);

}  // namespace omnifuse
