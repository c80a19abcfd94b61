#pragma once

// Batch, stream and bench runs over a configured pipeline.
//
// Outputs go to `{output}/{frame_idx}_{sensor_id}.png` with a JSON sidecar
// of the same stem, and a run report to `{output}/report.json`.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnifuse/config.hpp"
#include "omnifuse/error.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/mask_provider.hpp"

namespace omnifuse {

struct StageStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

/// Nearest-rank percentiles of per-frame stage durations.
class StageRecorder {
 public:
  void add(const std::string& stage, double ms);
  std::map<std::string, StageStats> summary() const;
  const std::vector<double>& samples(const std::string& stage) const;

 private:
  std::map<std::string, std::vector<double>> samples_;
};

StageStats summarize(std::vector<double> samples);

struct FrameOutput {
  std::int64_t frame_idx = 0;
  SensorMaskedImage image;
  nlohmann::json sidecar;
};

struct RunReport {
  RunMode mode = RunMode::batch;
  std::int64_t frames_total = 0;
  std::int64_t frames_processed = 0;
  std::vector<std::int64_t> skipped_frames;
  std::size_t outputs_written = 0;
  std::size_t refresh_failures = 0;
  double wall_seconds = 0.0;
  double fps = 0.0;
  std::map<std::string, StageStats> stages;
  /// Per-frame values of selected stages, for callers that need raw data.
  std::map<std::string, std::vector<double>> frame_ms;
  nlohmann::json config;

  double skipped_fraction() const noexcept;
  /// Data error when more than 1% of frames were skipped.
  ExitCode exit_code() const noexcept;
  nlohmann::json to_json() const;
};

struct RunOptions {
  /// Replace the configured backends (tests, benchmarks).
  std::shared_ptr<PromptBackend> prompts;
  std::shared_ptr<MaskBackend> masks;
  bool write_outputs = true;
  /// Receives every output in frame order after it is written.
  std::function<void(const FrameOutput&)> sink;
  /// Stream mode: hold frames to the dataset frame rate.
  bool pace = true;
  /// Stream mode: overrides the dataset frame rate for pacing.
  std::optional<double> pace_fps;
};

RunReport run_batch(const RunConfig& config, const RunOptions& options = {});
RunReport run_stream(const RunConfig& config, const RunOptions& options = {});
/// Synthetic in-memory frames at the configured bench size; warmup frames
/// are excluded from the statistics.
RunReport run_bench(const RunConfig& config);
RunReport run(const RunConfig& config, const RunOptions& options = {});

void write_report(const RunReport& report, const std::filesystem::path& path);

/// Calibration with its target rescaled to a new frame size.
CalibrationTransform rescale_target(const CalibrationTransform& calibration, int width, int height);

}  // namespace omnifuse
