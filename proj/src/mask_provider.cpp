#include "omnifuse/mask_provider.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

#include "omnifuse/error.hpp"
#include "omnifuse/logging.hpp"

namespace omnifuse {

TimestampNs monotonic_now_ns() noexcept {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void TaskContext::validate() const {
  if (task_text.empty()) throw InputError("task description must not be empty");
}

ScriptedPromptBackend::ScriptedPromptBackend(std::vector<Step> steps) : steps_(std::move(steps)) {
  if (steps_.empty()) throw InputError("scripted backend needs at least one step");
}

std::string ScriptedPromptBackend::generate(const TaskContext&, const RgbImage&) {
  std::unique_lock lock(mutex_);
  const Step step = steps_[std::min(calls_, steps_.size() - 1)];
  ++calls_;
  if (step.latency == kForever) {
    cv_.wait(lock, [&] { return cancelled_; });
  } else if (step.latency.count() > 0) {
    cv_.wait_for(lock, step.latency, [&] { return cancelled_; });
  }
  if (cancelled_) throw BackendError("scripted prompt backend cancelled");
  if (!step.answer) throw BackendError("scripted prompt backend failure");
  return *step.answer;
}

void ScriptedPromptBackend::cancel() {
  {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
  }
  cv_.notify_all();
}

std::size_t ScriptedPromptBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

SegMask FileMaskBackend::segment(const std::string& prompt, const RgbImage&, std::int64_t frame_idx) {
  const auto path = directory_ / (std::to_string(frame_idx) + ".png");
  if (!std::filesystem::exists(path)) throw BackendError("no stored mask for frame " + std::to_string(frame_idx) + " at " + path.string());
  auto mask = load_mask_png(path);
  mask.prompt_text = prompt;
  mask.source = MaskSource::file;
  return mask;
}

ScriptedMaskBackend::ScriptedMaskBackend(std::chrono::milliseconds latency, Generator generator)
    : latency_(latency), generator_(std::move(generator)) {}

SegMask ScriptedMaskBackend::segment(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx) {
  {
    std::unique_lock lock(mutex_);
    if (latency_.count() > 0) cv_.wait_for(lock, latency_, [&] { return cancelled_; });
    if (cancelled_) throw BackendError("scripted mask backend cancelled");
  }
  SegMask mask;
  mask.bits = generator_(prompt, rgb, frame_idx);
  mask.prompt_text = prompt;
  mask.source = MaskSource::service;
  return mask;
}

void ScriptedMaskBackend::cancel() {
  {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
  }
  cv_.notify_all();
}

namespace {

std::string call_prompt_backend(PromptBackend& backend, const TaskContext& ctx, const RgbImage& rgb) {
  std::string prompt = backend.generate(ctx, rgb);
  if (prompt.empty()) throw ProtocolError("prompt backend '" + backend.name() + "' returned an empty prompt");
  return prompt;
}

}  // namespace

PromptState acquire_prompt(const TaskContext& ctx, const RgbImage& first_rgb,
                           const std::shared_ptr<PromptBackend>& backend, std::chrono::milliseconds timeout) {
  ctx.validate();
  if (!backend) throw InputError("no prompt backend");
  // The call runs on its own thread so a stalled backend cannot outlive the
  // timeout here; the thread keeps its inputs alive by value.
  auto promise = std::make_shared<std::promise<std::string>>();
  auto future = promise->get_future();
  auto rgb = std::make_shared<RgbImage>(first_rgb);
  std::thread([promise, backend, ctx, rgb] {
    try {
      promise->set_value(call_prompt_backend(*backend, ctx, *rgb));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();

  if (future.wait_for(timeout) != std::future_status::ready) {
    backend->cancel();
    throw StartupError("prompt backend '" + backend->name() + "' did not answer within " +
                       std::to_string(timeout.count()) + " ms");
  }
  try {
    return PromptState{future.get(), 1, monotonic_now_ns()};
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw StartupError("prompt backend '" + backend->name() + "' failed: " + e.what());
  }
}

std::future<PromptState> refresh_prompt_async(const TaskContext& ctx, const PromptState& current,
                                              std::shared_ptr<const RgbImage> rgb,
                                              std::shared_ptr<PromptBackend> backend) {
  if (!backend || !rgb) throw InputError("refresh needs a backend and a frame");
  auto promise = std::make_shared<std::promise<PromptState>>();
  auto future = promise->get_future();
  std::thread([promise, backend = std::move(backend), rgb = std::move(rgb), ctx, generation = current.generation] {
    try {
      promise->set_value(PromptState{call_prompt_backend(*backend, ctx, *rgb), generation + 1, monotonic_now_ns()});
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();
  return future;
}

SegMask segment(const std::string& prompt, const RgbImage& rgb, MaskBackend& backend, std::int64_t frame_idx) {
  if (prompt.empty()) throw InputError("segmentation prompt must not be empty");
  SegMask mask = backend.segment(prompt, rgb, frame_idx);
  mask.validate(rgb.width, rgb.height);
  mask.prompt_text = prompt;
  if (mask.created_at == 0) mask.created_at = monotonic_now_ns();
  return mask;
}

// ---------------------------------------------------------------------------

struct MaskLifecycle::Shared {
  TaskContext ctx;
  std::shared_ptr<PromptBackend> prompts;
  std::shared_ptr<MaskBackend> masks;
  MaskLifecycleOptions options;

  std::mutex mutex;
  std::condition_variable cv;
  bool stop = false;
  bool exited = false;
  std::shared_ptr<const RgbImage> latest_frame;
  std::int64_t latest_frame_idx = 0;
  std::shared_ptr<const MaskSnapshot> published;
  std::uint64_t observed_generation = 0;
  std::size_t failures = 0;
};

MaskLifecycle::MaskLifecycle(TaskContext ctx, std::shared_ptr<PromptBackend> prompts,
                             std::shared_ptr<MaskBackend> masks, MaskLifecycleOptions options)
    : shared_(std::make_shared<Shared>()) {
  ctx.validate();
  if (!prompts || !masks) throw InputError("mask lifecycle needs prompt and mask backends");
  if (options.refresh_period.count() <= 0) throw InputError("refresh period must be positive");
  shared_->ctx = std::move(ctx);
  shared_->prompts = std::move(prompts);
  shared_->masks = std::move(masks);
  shared_->options = options;
}

MaskLifecycle::~MaskLifecycle() { stop(); }

void MaskLifecycle::start(std::shared_ptr<const RgbImage> first_rgb, std::int64_t frame_idx) {
  if (started_) throw InputError("mask lifecycle already started");
  if (!first_rgb) throw InputError("start needs a frame");
  PromptState state = acquire_prompt(shared_->ctx, *first_rgb, shared_->prompts, shared_->options.startup_timeout);
  SegMask mask;
  try {
    mask = segment(state.prompt, *first_rgb, *shared_->masks, frame_idx);
  } catch (const BackendError& e) {
    throw StartupError("mask backend '" + shared_->masks->name() + "' failed at task start: " + e.what());
  }
  mask.generation = state.generation;
  auto snapshot = std::make_shared<MaskSnapshot>(MaskSnapshot{state, std::move(mask), monotonic_now_ns()});
  {
    std::lock_guard lock(shared_->mutex);
    shared_->published = std::move(snapshot);
    shared_->latest_frame = std::move(first_rgb);
    shared_->latest_frame_idx = frame_idx;
  }
  started_ = true;
  std::thread(worker_loop, shared_).detach();
}

void MaskLifecycle::offer_frame(std::shared_ptr<const RgbImage> rgb, std::int64_t frame_idx) {
  std::lock_guard lock(shared_->mutex);
  shared_->latest_frame = std::move(rgb);
  shared_->latest_frame_idx = frame_idx;
}

std::shared_ptr<const MaskSnapshot> MaskLifecycle::current() {
  std::shared_ptr<const MaskSnapshot> snap;
  bool newly_observed = false;
  {
    std::lock_guard lock(shared_->mutex);
    snap = shared_->published;
    if (snap && snap->prompt.generation > shared_->observed_generation) {
      shared_->observed_generation = snap->prompt.generation;
      newly_observed = true;
    }
  }
  if (newly_observed) shared_->cv.notify_all();
  return snap;
}

std::size_t MaskLifecycle::refresh_failures() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->failures;
}

void MaskLifecycle::stop() {
  if (!started_) return;
  started_ = false;
  std::unique_lock lock(shared_->mutex);
  shared_->stop = true;
  shared_->cv.notify_all();
  lock.unlock();
  shared_->prompts->cancel();
  shared_->masks->cancel();
  lock.lock();
  if (!shared_->cv.wait_for(lock, shared_->options.shutdown_grace, [&] { return shared_->exited; })) {
    logger()->warn("mask refresh worker still busy at shutdown; leaving it to finish in the background");
  }
}

void MaskLifecycle::worker_loop(std::shared_ptr<Shared> s) {
  using clock = std::chrono::steady_clock;
  auto next = clock::now() + s->options.refresh_period;
  std::unique_lock lock(s->mutex);
  while (!s->stop) {
    if (s->cv.wait_until(lock, next, [&] { return s->stop; })) break;
    // Gapless publication: wait until the frame loop has seen the last pair.
    s->cv.wait(lock, [&] { return s->stop || s->observed_generation >= s->published->prompt.generation; });
    if (s->stop) break;
    const auto rgb = s->latest_frame;
    const auto frame_idx = s->latest_frame_idx;
    const PromptState previous = s->published->prompt;
    lock.unlock();

    std::shared_ptr<const MaskSnapshot> fresh;
    try {
      PromptState state{call_prompt_backend(*s->prompts, s->ctx, *rgb), previous.generation + 1, 0};
      SegMask mask = segment(state.prompt, *rgb, *s->masks, frame_idx);
      state.last_refreshed = monotonic_now_ns();
      mask.generation = state.generation;
      fresh = std::make_shared<MaskSnapshot>(MaskSnapshot{std::move(state), std::move(mask), monotonic_now_ns()});
    } catch (const std::exception& e) {
      lock.lock();
      if (!s->stop) {
        ++s->failures;
        logger()->warn("prompt/mask refresh failed, keeping generation {}: {}", previous.generation, e.what());
      }
      lock.unlock();
    }

    lock.lock();
    if (fresh && !s->stop) {
      s->published = std::move(fresh);
      logger()->debug("published prompt generation {}", s->published->prompt.generation);
    }
    // The period counts from the end of the previous attempt, so a frame
    // never sees a mask older than the period plus one refresh duration.
    next = clock::now() + s->options.refresh_period;
  }
  s->exited = true;
  s->cv.notify_all();
}

// ---------------------------------------------------------------------------

FrameClockMaskSchedule::FrameClockMaskSchedule(TaskContext ctx, std::shared_ptr<PromptBackend> prompts,
                                               std::shared_ptr<MaskBackend> masks,
                                               std::chrono::milliseconds refresh_period,
                                               std::chrono::milliseconds timeout, bool per_frame_segmentation)
    : ctx_(std::move(ctx)),
      prompts_(std::move(prompts)),
      masks_(std::move(masks)),
      refresh_period_(refresh_period),
      timeout_(timeout),
      per_frame_(per_frame_segmentation) {
  ctx_.validate();
  if (!prompts_ || !masks_) throw InputError("mask schedule needs prompt and mask backends");
}

std::shared_ptr<const MaskSnapshot> FrameClockMaskSchedule::mask_for(const RgbImage& rgb, std::int64_t frame_idx,
                                                                     TimestampNs frame_time_ns) {
  auto make = [&](PromptState state) {
    SegMask mask = segment(state.prompt, rgb, *masks_, frame_idx);
    mask.created_at = frame_time_ns;
    mask.generation = state.generation;
    return std::make_shared<const MaskSnapshot>(MaskSnapshot{std::move(state), std::move(mask), frame_time_ns});
  };
  if (!current_) {
    PromptState state = acquire_prompt(ctx_, rgb, prompts_, timeout_);
    state.last_refreshed = frame_time_ns;
    current_ = make(std::move(state));
    return current_;
  }
  const auto period_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(refresh_period_).count();
  if (frame_time_ns - std::max(current_->prompt.last_refreshed, last_attempt_) >= period_ns) {
    last_attempt_ = frame_time_ns;
    try {
      PromptState state{call_prompt_backend(*prompts_, ctx_, rgb), current_->prompt.generation + 1, frame_time_ns};
      current_ = make(std::move(state));
      return current_;
    } catch (const ProtocolError& e) {
      logger()->warn("prompt refresh rejected at frame {}: {}", frame_idx, e.what());
    } catch (const BackendError& e) {
      logger()->warn("prompt refresh failed at frame {}: {}", frame_idx, e.what());
    }
  }
  if (per_frame_) {
    PromptState state = current_->prompt;
    current_ = make(std::move(state));
  }
  return current_;
}

}  // namespace omnifuse
