#pragma once

// Recorded run directory:
//
//   manifest.json            {frames, fps, width, height, streams: {id: {...}}}
//   {idx}_rgb.png            RGB frame idx (the master clock)
//   {j}_{sensor_id}.bin      radar snapshot j
//   {j}_{sensor_id}.wav      microphone block j
//   {j}_{sensor_id}.csv|pgm  thermal frame j
//
// Sensor streams run at their own rate; frame idx uses the latest sample j
// whose time is not after the RGB frame time.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>

#include "omnifuse/audio.hpp"
#include "omnifuse/config.hpp"
#include "omnifuse/raster.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

using SensorPayload = std::variant<ThermalFrame, ArraySnapshot, AudioBlock>;

struct StreamInfo {
  double rate_hz = 0.0;
  TimestampNs offset_ns = 0;
  std::int64_t samples = 0;
  std::string extension;  // "bin", "wav", "csv" or "pgm"

  TimestampNs sample_time(std::int64_t j) const noexcept;
  /// Latest sample at or before `t`, or nullopt before the first one.
  std::optional<std::int64_t> sample_at(TimestampNs t) const noexcept;
};

struct Manifest {
  std::int64_t frames = 0;
  double fps = 10.0;
  int width = 0;
  int height = 0;
  std::map<std::string, StreamInfo> streams;

  TimestampNs frame_time(std::int64_t frame_idx) const noexcept;
  double frame_interval_ms() const noexcept { return 1000.0 / fps; }
};

Manifest manifest_from_json_text(std::string_view text);  // ParseError / DataError
std::string manifest_to_json_text(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& dataset_dir);
void save_manifest(const Manifest& manifest, const std::filesystem::path& dataset_dir);

std::filesystem::path rgb_frame_path(const std::filesystem::path& dir, std::int64_t frame_idx);
std::filesystem::path payload_path(const std::filesystem::path& dir, std::int64_t sample, const std::string& sensor_id,
                                   const std::string& extension);

/// Default file extension for a sensor kind.
std::string payload_extension(SensorKind kind);

struct FrameBundle {
  std::int64_t frame_idx = 0;
  TimestampNs timestamp = 0;
  std::shared_ptr<const RgbImage> rgb;
  std::map<std::string, SensorPayload> payloads;  // sensors without a sample yet are absent
  std::map<std::string, std::int64_t> sample_index;
};

class Dataset {
 public:
  /// Throws DataError when the manifest is missing or lists a sensor stream
  /// that the config does not know about in a conflicting format.
  Dataset(std::filesystem::path dir, const std::vector<SensorConfig>& sensors);

  const Manifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::int64_t frame_count() const noexcept { return manifest_.frames; }

  /// Throws DataError naming the file when the RGB frame or a needed
  /// payload cannot be read. Held samples are served from a cache.
  FrameBundle load(std::int64_t frame_idx);

 private:
  SensorPayload load_payload(const SensorConfig& sensor, const StreamInfo& info, std::int64_t sample) const;

  std::filesystem::path dir_;
  std::vector<SensorConfig> sensors_;
  Manifest manifest_;
  std::mutex cache_mutex_;
  std::map<std::string, std::pair<std::int64_t, SensorPayload>> cache_;
};

}  // namespace omnifuse
