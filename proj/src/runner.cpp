#include "omnifuse/runner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <future>
#include <thread>

#include "omnifuse/dataset.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/frame_pipeline.hpp"
#include "omnifuse/image_io.hpp"
#include "omnifuse/logging.hpp"
#include "omnifuse/synth.hpp"

namespace omnifuse {

namespace {

using clock_type = std::chrono::steady_clock;
using nlohmann::json;

double ms_since(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

json stats_json(const StageStats& s) {
  json j{{"count", s.count}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p90_ms", s.p90_ms},
         {"p99_ms", s.p99_ms}, {"max_ms", s.max_ms}};
  if (s.mean_ms > 0.0) j["fps"] = 1000.0 / s.mean_ms;
  return j;
}

void record_times(StageRecorder& rec, const StageTimes& t) {
  rec.add("sensor", t.sensor_ms);
  rec.add("colorize", t.colorize_ms);
  rec.add("calibrate", t.calibrate_ms);
  rec.add("blend", t.blend_ms);
}

json make_sidecar(const FramePipeline& pipeline, const SensorImage& image, const SensorMaskedImage& out,
                  const FrameBundle& bundle, double mask_age_ms) {
  const auto& sensor = pipeline.sensor(image.sensor_id);
  json j{{"frame_idx", bundle.frame_idx},
         {"sensor_id", image.sensor_id},
         {"kind", to_string(sensor.kind)},
         {"alpha", out.alpha},
         {"mask_prompt", out.mask_prompt},
         {"mask_generation", out.mask_generation},
         {"mask_age_ms", mask_age_ms},
         {"frame_timestamp_ns", bundle.timestamp},
         {"sample_index", bundle.sample_index.at(image.sensor_id)},
         {"peak_px", {image.peak_px.x, image.peak_px.y}}};
  if (sensor.is_array()) j["wavelength_m"] = image.wavelength_m;
  return j;
}

void write_output(const std::filesystem::path& dir, const FrameOutput& out) {
  const auto stem = std::to_string(out.frame_idx) + "_" + out.image.sensor_id;
  save_png(out.image.image, dir / (stem + ".png"));
  write_file_text(dir / (stem + ".json"), out.sidecar.dump(2) + "\n");
}

void check_frame_size(const FramePipeline& pipeline, const Dataset& dataset) {
  const auto& m = dataset.manifest();
  if (m.frames > 0 && (m.width != pipeline.width() || m.height != pipeline.height())) {
    throw ConfigError("calibrations target " + std::to_string(pipeline.width()) + "x" +
                      std::to_string(pipeline.height()) + " but the dataset frames are " + std::to_string(m.width) +
                      "x" + std::to_string(m.height));
  }
}

// Renders and fuses every sensor with a payload in this frame.
std::vector<FrameOutput> fuse_bundle(const FramePipeline& pipeline, const FrameBundle& bundle,
                                     const MaskSnapshot& snap, double mask_age_ms, StageRecorder& rec,
                                     bool concurrent) {
  struct Result {
    SensorImage image;
    SensorMaskedImage fused;
    StageTimes times;
  };
  auto work = [&](const SensorConfig& s) {
    Result r;
    r.image = pipeline.render(s.sensor_id, bundle.payloads.at(s.sensor_id), &r.times);
    r.fused = pipeline.fuse(r.image, *bundle.rgb, snap.mask, &r.times);
    r.fused.frame_timestamp = bundle.timestamp;
    return r;
  };
  std::vector<const SensorConfig*> active;
  for (const auto& s : pipeline.sensors()) {
    if (bundle.payloads.count(s.sensor_id)) active.push_back(&s);
  }
  std::vector<Result> results;
  results.reserve(active.size());
  if (concurrent && active.size() > 1) {
    std::vector<std::future<Result>> pending;
    for (std::size_t i = 1; i < active.size(); ++i) pending.push_back(std::async(std::launch::async, work, std::cref(*active[i])));
    std::exception_ptr failure;
    try {
      results.push_back(work(*active[0]));
    } catch (...) {
      failure = std::current_exception();
    }
    for (auto& f : pending) {
      try {
        results.push_back(f.get());
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (const auto* s : active) results.push_back(work(*s));
  }

  StageTimes total;
  std::vector<FrameOutput> outputs;
  for (auto& r : results) {
    total.sensor_ms += r.times.sensor_ms;
    total.colorize_ms += r.times.colorize_ms;
    total.calibrate_ms += r.times.calibrate_ms;
    total.blend_ms += r.times.blend_ms;
    FrameOutput out;
    out.frame_idx = bundle.frame_idx;
    out.sidecar = make_sidecar(pipeline, r.image, r.fused, bundle, mask_age_ms);
    out.image = std::move(r.fused);
    outputs.push_back(std::move(out));
  }
  record_times(rec, total);
  return outputs;
}

// Ordered background writer for stream mode.
class OutputQueue {
 public:
  OutputQueue(std::filesystem::path dir, const RunOptions& options)
      : dir_(std::move(dir)), write_(options.write_outputs), sink_(options.sink), thread_([this] { loop(); }) {}
  ~OutputQueue() { finish(); }

  void push(std::vector<FrameOutput> frame) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(frame));
    }
    cv_.notify_one();
  }

  std::size_t finish() {
    {
      std::lock_guard lock(mutex_);
      done_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
    return written_;
  }

 private:
  void loop() {
    for (;;) {
      std::vector<FrameOutput> frame;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return done_ || !queue_.empty(); });
        if (queue_.empty()) return;
        frame = std::move(queue_.front());
        queue_.pop_front();
      }
      for (const auto& out : frame) {
        try {
          if (write_) {
            write_output(dir_, out);
            ++written_;
          }
          if (sink_) sink_(out);
        } catch (...) {
          if (!error_) error_ = std::current_exception();
        }
      }
    }
  }

  std::filesystem::path dir_;
  bool write_;
  std::function<void(const FrameOutput&)> sink_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::vector<FrameOutput>> queue_;
  bool done_ = false;
  std::size_t written_ = 0;
  std::exception_ptr error_;
  std::thread thread_;
};

std::shared_ptr<PromptBackend> prompts_for(const RunConfig& config, const RunOptions& options) {
  return options.prompts ? options.prompts : make_prompt_backend(config);
}

std::shared_ptr<MaskBackend> masks_for(const RunConfig& config, const RunOptions& options) {
  return options.masks ? options.masks : make_mask_backend(config);
}

void finish_report(RunReport& report, const StageRecorder& rec, clock_type::time_point t0) {
  report.wall_seconds = std::chrono::duration<double>(clock_type::now() - t0).count();
  report.fps = report.wall_seconds > 0.0 ? static_cast<double>(report.frames_processed) / report.wall_seconds : 0.0;
  report.stages = rec.summary();
}

}  // namespace

void StageRecorder::add(const std::string& stage, double ms) { samples_[stage].push_back(ms); }

std::map<std::string, StageStats> StageRecorder::summary() const {
  std::map<std::string, StageStats> out;
  for (const auto& [stage, values] : samples_) out[stage] = summarize(values);
  return out;
}

const std::vector<double>& StageRecorder::samples(const std::string& stage) const {
  static const std::vector<double> empty;
  const auto it = samples_.find(stage);
  return it == samples_.end() ? empty : it->second;
}

StageStats summarize(std::vector<double> v) {
  StageStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto rank = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
  };
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean_ms = sum / static_cast<double>(v.size());
  s.p50_ms = rank(50);
  s.p90_ms = rank(90);
  s.p99_ms = rank(99);
  s.max_ms = v.back();
  return s;
}

double RunReport::skipped_fraction() const noexcept {
  return frames_total > 0 ? static_cast<double>(skipped_frames.size()) / static_cast<double>(frames_total) : 0.0;
}

ExitCode RunReport::exit_code() const noexcept {
  return skipped_fraction() > 0.01 ? ExitCode::data : ExitCode::success;
}

json RunReport::to_json() const {
  json stages_j = json::object();
  for (const auto& [name, s] : stages) stages_j[name] = stats_json(s);
  return {{"mode", to_string(mode)},
          {"frames", frames_total},
          {"frames_processed", frames_processed},
          {"frames_skipped", skipped_frames.size()},
          {"skipped_frame_idx", skipped_frames},
          {"outputs_written", outputs_written},
          {"refresh_failures", refresh_failures},
          {"wall_seconds", wall_seconds},
          {"fps", fps},
          {"stages", stages_j},
          {"config", config}};
}

void write_report(const RunReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_text(path, report.to_json().dump(2) + "\n");
}

CalibrationTransform rescale_target(const CalibrationTransform& c, int width, int height) {
  if (c.target_width == width && c.target_height == height) return c;
  if (c.scale_first && c.rotation_deg != 0.0) {
    throw InputError("cannot rescale a scale-first calibration with rotation");
  }
  const double fx = static_cast<double>(width) / c.target_width;
  const double fy = static_cast<double>(height) / c.target_height;
  auto out = c;
  out.scale_x *= fx;
  out.scale_y *= fy;
  out.translate_x *= fx;
  out.translate_y *= fy;
  out.target_width = width;
  out.target_height = height;
  const int x0 = static_cast<int>(std::lround(c.crop.x * fx)), y0 = static_cast<int>(std::lround(c.crop.y * fy));
  const int x1 = static_cast<int>(std::lround((c.crop.x + c.crop.w) * fx));
  const int y1 = static_cast<int>(std::lround((c.crop.y + c.crop.h) * fy));
  out.crop = {x0, y0, std::min(x1, width) - x0, std::min(y1, height) - y0};
  out.validate();
  return out;
}

RunReport run_batch(const RunConfig& config, const RunOptions& options) {
  const auto t0 = clock_type::now();
  RunReport report;
  report.mode = RunMode::batch;
  report.config = config.echo;
  const FramePipeline pipeline(config);
  Dataset dataset(config.input, config.sensors);
  check_frame_size(pipeline, dataset);
  report.frames_total = dataset.frame_count();
  StageRecorder rec;
  if (report.frames_total == 0) {
    finish_report(report, rec, t0);
    return report;
  }
  if (options.write_outputs) std::filesystem::create_directories(config.output);
  FrameClockMaskSchedule schedule(TaskContext{config.task, config.output.filename().string(), monotonic_now_ns()},
                                  prompts_for(config, options), masks_for(config, options),
                                  config.mask_provider.refresh_period, config.mask_provider.timeout,
                                  config.mask_provider.per_frame);

  for (std::int64_t idx = 0; idx < report.frames_total; ++idx) {
    const auto frame_start = clock_type::now();
    std::vector<FrameOutput> outputs;
    try {
      auto t = clock_type::now();
      const auto bundle = dataset.load(idx);
      rec.add("load", ms_since(t));
      t = clock_type::now();
      const auto snap = schedule.mask_for(*bundle.rgb, idx, bundle.timestamp);
      rec.add("mask", ms_since(t));
      const double age_ms = static_cast<double>(bundle.timestamp - snap->mask.created_at) / 1e6;
      outputs = fuse_bundle(pipeline, bundle, *snap, age_ms, rec, false);
    } catch (const DataError& e) {
      logger()->warn("skipping frame {}: {}", idx, e.what());
      report.skipped_frames.push_back(idx);
      continue;
    } catch (const InputError& e) {
      logger()->warn("skipping frame {}: {}", idx, e.what());
      report.skipped_frames.push_back(idx);
      continue;
    }
    const auto t = clock_type::now();
    for (const auto& out : outputs) {
      if (options.write_outputs) {
        write_output(config.output, out);
        ++report.outputs_written;
      }
      if (options.sink) options.sink(out);
    }
    rec.add("write", ms_since(t));
    rec.add("frame", ms_since(frame_start));
    ++report.frames_processed;
  }
  finish_report(report, rec, t0);
  if (options.write_outputs) write_report(report, config.output / "report.json");
  return report;
}

RunReport run_stream(const RunConfig& config, const RunOptions& options) {
  const auto t0 = clock_type::now();
  RunReport report;
  report.mode = RunMode::stream;
  report.config = config.echo;
  const FramePipeline pipeline(config);
  Dataset dataset(config.input, config.sensors);
  check_frame_size(pipeline, dataset);
  report.frames_total = dataset.frame_count();
  StageRecorder rec;
  if (report.frames_total == 0) {
    finish_report(report, rec, t0);
    return report;
  }
  if (options.write_outputs) std::filesystem::create_directories(config.output);

  std::int64_t first = 0;
  std::optional<FrameBundle> first_bundle;
  for (; first < report.frames_total && !first_bundle; ++first) {
    try {
      first_bundle = dataset.load(first);
    } catch (const DataError& e) {
      logger()->warn("skipping frame {}: {}", first, e.what());
      report.skipped_frames.push_back(first);
    }
  }
  if (!first_bundle) {
    finish_report(report, rec, t0);
    return report;
  }
  --first;

  MaskLifecycleOptions lifecycle_options;
  lifecycle_options.refresh_period = config.mask_provider.refresh_period;
  lifecycle_options.startup_timeout = config.mask_provider.timeout;
  MaskLifecycle lifecycle(TaskContext{config.task, config.output.filename().string(), monotonic_now_ns()},
                          prompts_for(config, options), masks_for(config, options), lifecycle_options);
  lifecycle.start(first_bundle->rgb, first);

  OutputQueue queue(config.output, options);
  const double fps = options.pace_fps.value_or(dataset.manifest().fps);
  const auto interval = std::chrono::duration_cast<clock_type::duration>(std::chrono::duration<double>(1.0 / fps));
  const auto loop_start = clock_type::now();
  for (std::int64_t idx = first; idx < report.frames_total; ++idx) {
    if (options.pace) std::this_thread::sleep_until(loop_start + (idx - first) * interval);
    const auto frame_start = clock_type::now();
    try {
      auto t = clock_type::now();
      FrameBundle bundle = idx == first ? std::move(*first_bundle) : dataset.load(idx);
      rec.add("load", ms_since(t));
      t = clock_type::now();
      lifecycle.offer_frame(bundle.rgb, idx);
      const auto snap = lifecycle.current();
      rec.add("mask", ms_since(t));
      const double age_ms = static_cast<double>(monotonic_now_ns() - snap->ready_at) / 1e6;
      queue.push(fuse_bundle(pipeline, bundle, *snap, age_ms, rec, true));
    } catch (const DataError& e) {
      logger()->warn("skipping frame {}: {}", idx, e.what());
      report.skipped_frames.push_back(idx);
      continue;
    } catch (const InputError& e) {
      logger()->warn("skipping frame {}: {}", idx, e.what());
      report.skipped_frames.push_back(idx);
      continue;
    }
    const double frame_ms = ms_since(frame_start);
    rec.add("frame", frame_ms);
    report.frame_ms["frame"].push_back(frame_ms);
    ++report.frames_processed;
  }
  lifecycle.stop();
  report.refresh_failures = lifecycle.refresh_failures();
  report.outputs_written = queue.finish();
  finish_report(report, rec, t0);
  if (options.write_outputs) write_report(report, config.output / "report.json");
  return report;
}

RunReport run_bench(const RunConfig& config) {
  RunReport report;
  report.mode = RunMode::bench;
  report.config = config.echo;
  const auto& b = config.bench;
  report.frames_total = b.frames;
  StageRecorder rec;
  if (b.frames == 0) {
    finish_report(report, rec, clock_type::now());
    return report;
  }

  auto sensors = config.sensors;
  for (auto& s : sensors) s.calibration = rescale_target(s.calibration, b.width, b.height);
  const FramePipeline pipeline(std::move(sensors));

  // Synthetic inputs, generated up front so no I/O or simulation is timed.
  constexpr int kPool = 16;
  Scene scene;
  scene.width = b.width;
  scene.height = b.height;
  GaussianSource rng(config.seed);
  std::vector<TargetTruth> targets(1);
  targets[0].box = {b.width / 3, b.height / 3, b.width / 3, b.height / 3};
  scene.targets.resize(1);
  const auto rgb = render_rgb(scene, targets, mix_seed(config.seed, 0));
  SegMask mask;
  mask.bits = truth_mask(scene, targets);
  mask.prompt_text = config.mask_provider.prompt.empty() ? "target" : config.mask_provider.prompt;
  mask.generation = 1;

  std::map<std::string, std::vector<SensorPayload>> pool;
  for (const auto& s : pipeline.sensors()) {
    for (int i = 0; i < kPool; ++i) {
      const auto seed = mix_seed(config.seed, static_cast<std::uint64_t>(i) + 1, pool.size() + 1);
      if (s.kind == SensorKind::thermal) {
        ThermalFrame f{s.thermal_width, s.thermal_height,
                       std::vector<double>(static_cast<std::size_t>(s.thermal_width) * s.thermal_height), 0};
        GaussianSource noise(seed);
        const double cx = rng.uniform() * s.thermal_width, cy = rng.uniform() * s.thermal_height;
        for (int y = 0; y < s.thermal_height; ++y)
          for (int x = 0; x < s.thermal_width; ++x)
            f.values[static_cast<std::size_t>(y) * s.thermal_width + x] =
                22.0 + 20.0 * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 50.0) + 0.3 * noise.next();
        pool[s.sensor_id].push_back(std::move(f));
        continue;
      }
      const PointSource src{s.grid.az_min_deg + rng.uniform() * (s.grid.az_max_deg - s.grid.az_min_deg),
                            s.grid.el_min_deg + rng.uniform() * (s.grid.el_max_deg - s.grid.el_min_deg), 0.5, 0.0};
      if (s.kind == SensorKind::mmwave_radar) {
        pool[s.sensor_id].push_back(simulate_snapshot(*s.geometry, std::span(&src, 1), noise_std_for_snr(0.5, 20.0), seed));
      } else {
        const double tone = s.speed_of_sound / s.geometry->wavelength();
        pool[s.sensor_id].push_back(
            synthesize_tone_block(*s.geometry, std::span(&src, 1), tone, 48000.0, 960, tone_noise_std(0.5, 20.0), seed));
      }
    }
  }

  StageRecorder warm;
  clock_type::time_point measured_start;
  for (int i = 0; i < b.warmup + b.frames; ++i) {
    if (i == b.warmup) measured_start = clock_type::now();
    auto& r = i < b.warmup ? warm : rec;
    const auto frame_start = clock_type::now();
    StageTimes total;
    for (const auto& s : pipeline.sensors()) {
      StageTimes t;
      const auto image = pipeline.render(s.sensor_id, pool[s.sensor_id][static_cast<std::size_t>(i % kPool)], &t);
      const auto fused = pipeline.fuse(image, rgb, mask, &t);
      total.sensor_ms += t.sensor_ms;
      total.colorize_ms += t.colorize_ms;
      total.calibrate_ms += t.calibrate_ms;
      total.blend_ms += t.blend_ms;
    }
    record_times(r, total);
    r.add("frame", ms_since(frame_start));
  }
  report.frames_processed = b.frames;
  report.frame_ms["frame"] = rec.samples("frame");
  finish_report(report, rec, measured_start);
  return report;
}

RunReport run(const RunConfig& config, const RunOptions& options) {
  switch (config.mode) {
    case RunMode::batch: return run_batch(config, options);
    case RunMode::stream: return run_stream(config, options);
    case RunMode::bench: return run_bench(config);
  }
  return run_batch(config, options);
}

}  // namespace omnifuse
