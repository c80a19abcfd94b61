#pragma once

// Prompt and segmentation-mask lifecycle. A task acquires its prompt once,
// blocking; afterwards a background worker refreshes (prompt, mask) pairs
// and the frame loop only ever reads the latest completed pair.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "omnifuse/fusion.hpp"
#include "omnifuse/raster.hpp"

namespace omnifuse {

TimestampNs monotonic_now_ns() noexcept;

struct TaskContext {
  std::string task_text;
  std::string task_id;
  TimestampNs started_at = 0;

  void validate() const;  // task_text non-empty
};

struct PromptState {
  std::string prompt;
  std::uint64_t generation = 0;
  TimestampNs last_refreshed = 0;
};

class PromptBackend {
 public:
  virtual ~PromptBackend() = default;
  virtual std::string name() const = 0;
  /// Segmentation prompt for the task in the current scene. May block.
  virtual std::string generate(const TaskContext& ctx, const RgbImage& rgb) = 0;
  /// Unblocks in-flight calls during shutdown; they may then throw.
  virtual void cancel() {}
};

class MaskBackend {
 public:
  virtual ~MaskBackend() = default;
  virtual std::string name() const = 0;
  /// 0/1 mask at the RGB frame size. May block.
  virtual SegMask segment(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx) = 0;
  virtual void cancel() {}
};

/// Always answers with the configured prompt.
class FixedPromptBackend final : public PromptBackend {
 public:
  explicit FixedPromptBackend(std::string prompt) : prompt_(std::move(prompt)) {}
  std::string name() const override { return "stub-prompt"; }
  std::string generate(const TaskContext&, const RgbImage&) override { return prompt_; }

 private:
  std::string prompt_;
};

/// Replays a script of (latency, answer) steps; the last step repeats. An
/// empty `answer` optional makes the call fail with BackendError. A latency
/// of `kForever` stalls until cancel().
class ScriptedPromptBackend final : public PromptBackend {
 public:
  struct Step {
    std::chrono::milliseconds latency{0};
    std::optional<std::string> answer;
  };
  static constexpr std::chrono::milliseconds kForever = std::chrono::milliseconds::max();

  explicit ScriptedPromptBackend(std::vector<Step> steps);
  std::string name() const override { return "scripted-prompt"; }
  std::string generate(const TaskContext& ctx, const RgbImage& rgb) override;
  void cancel() override;
  std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Step> steps_;
  std::size_t calls_ = 0;
  bool cancelled_ = false;
};

/// Loads `<directory>/<frame_idx>.png`.
class FileMaskBackend final : public MaskBackend {
 public:
  explicit FileMaskBackend(std::filesystem::path directory) : directory_(std::move(directory)) {}
  std::string name() const override { return "file-mask:" + directory_.string(); }
  SegMask segment(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx) override;

 private:
  std::filesystem::path directory_;
};

/// Computes masks with a callback after an artificial latency.
class ScriptedMaskBackend final : public MaskBackend {
 public:
  using Generator = std::function<Bitmap(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx)>;
  ScriptedMaskBackend(std::chrono::milliseconds latency, Generator generator);
  std::string name() const override { return "scripted-mask"; }
  SegMask segment(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx) override;
  void cancel() override;

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::chrono::milliseconds latency_;
  Generator generator_;
  bool cancelled_ = false;
};

inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{30000};
inline constexpr std::chrono::milliseconds kDefaultRefreshPeriod{2000};

/// Blocking first prompt of a task: generation 1. A backend that fails or
/// does not answer within `timeout` raises StartupError naming it; an empty
/// prompt raises ProtocolError.
PromptState acquire_prompt(const TaskContext& ctx, const RgbImage& first_rgb,
                           const std::shared_ptr<PromptBackend>& backend,
                           std::chrono::milliseconds timeout = kDefaultBackendTimeout);

/// Starts one refresh on a detached thread and returns at once. The future
/// yields generation + 1 on success or rethrows the backend failure.
std::future<PromptState> refresh_prompt_async(const TaskContext& ctx, const PromptState& current,
                                              std::shared_ptr<const RgbImage> rgb,
                                              std::shared_ptr<PromptBackend> backend);

/// Runs the mask backend and checks the result against the RGB frame.
SegMask segment(const std::string& prompt, const RgbImage& rgb, MaskBackend& backend, std::int64_t frame_idx);

/// A published (prompt, mask) pair. Immutable once shared.
struct MaskSnapshot {
  PromptState prompt;
  SegMask mask;
  TimestampNs ready_at = 0;
};

struct MaskLifecycleOptions {
  std::chrono::milliseconds refresh_period = kDefaultRefreshPeriod;
  std::chrono::milliseconds startup_timeout = kDefaultBackendTimeout;
  /// How long stop() waits for a busy worker before detaching it.
  std::chrono::milliseconds shutdown_grace{250};
};

/// Background refresh worker for one task.
///
/// Publication is gapless: the worker does not start a refresh until the
/// frame loop has observed the latest generation, so consecutive frames see
/// generations that differ by at most one.
class MaskLifecycle {
 public:
  MaskLifecycle(TaskContext ctx, std::shared_ptr<PromptBackend> prompts, std::shared_ptr<MaskBackend> masks,
                MaskLifecycleOptions options = {});
  ~MaskLifecycle();
  MaskLifecycle(const MaskLifecycle&) = delete;
  MaskLifecycle& operator=(const MaskLifecycle&) = delete;

  /// Blocking: prompt generation 1 and its mask, then launches the worker.
  void start(std::shared_ptr<const RgbImage> first_rgb, std::int64_t frame_idx);
  /// Hands the newest frame to the worker. Never blocks on a backend.
  void offer_frame(std::shared_ptr<const RgbImage> rgb, std::int64_t frame_idx);
  /// Latest completed pair. Never blocks on a backend.
  std::shared_ptr<const MaskSnapshot> current();
  void stop();

  std::size_t refresh_failures() const;

 private:
  struct Shared;
  static void worker_loop(std::shared_ptr<Shared> shared);

  std::shared_ptr<Shared> shared_;
  bool started_ = false;
};

/// Deterministic lifecycle for offline runs: refreshes happen inline when the
/// frame clock has advanced by at least the refresh period, or every frame
/// when `per_frame_segmentation` is set.
class FrameClockMaskSchedule {
 public:
  FrameClockMaskSchedule(TaskContext ctx, std::shared_ptr<PromptBackend> prompts, std::shared_ptr<MaskBackend> masks,
                         std::chrono::milliseconds refresh_period, std::chrono::milliseconds timeout,
                         bool per_frame_segmentation);

  /// Mask for a frame captured at `frame_time_ns` (frame clock).
  std::shared_ptr<const MaskSnapshot> mask_for(const RgbImage& rgb, std::int64_t frame_idx, TimestampNs frame_time_ns);

 private:
  TaskContext ctx_;
  std::shared_ptr<PromptBackend> prompts_;
  std::shared_ptr<MaskBackend> masks_;
  std::chrono::milliseconds refresh_period_;
  std::chrono::milliseconds timeout_;
  bool per_frame_;
  std::shared_ptr<const MaskSnapshot> current_;
  TimestampNs last_attempt_ = 0;
};

}  // namespace omnifuse
