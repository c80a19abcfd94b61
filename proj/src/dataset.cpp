#include "omnifuse/dataset.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/image_io.hpp"

namespace omnifuse {

namespace {

constexpr double kNsPerSecond = 1e9;

}  // namespace

TimestampNs StreamInfo::sample_time(std::int64_t j) const noexcept {
  return offset_ns + static_cast<TimestampNs>(std::llround(static_cast<double>(j) * kNsPerSecond / rate_hz));
}

std::optional<std::int64_t> StreamInfo::sample_at(TimestampNs t) const noexcept {
  if (samples <= 0 || t < offset_ns) return std::nullopt;
  auto j = static_cast<std::int64_t>(std::floor(static_cast<double>(t - offset_ns) * rate_hz / kNsPerSecond + 1e-9));
  j = std::min(j, samples - 1);
  // Guard against rounding on either side of a sample boundary.
  while (j > 0 && sample_time(j) > t) --j;
  while (j + 1 < samples && sample_time(j + 1) <= t) ++j;
  if (sample_time(j) > t) return std::nullopt;
  return j;
}

TimestampNs Manifest::frame_time(std::int64_t frame_idx) const noexcept {
  return static_cast<TimestampNs>(std::llround(static_cast<double>(frame_idx) * kNsPerSecond / fps));
}

Manifest manifest_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what(),
                     line_of_offset(std::string(text), e.byte > 0 ? e.byte - 1 : 0));
  }
  Manifest m;
  try {
    m.frames = j.at("frames").get<std::int64_t>();
    m.fps = j.value("fps", 10.0);
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    if (j.contains("streams")) {
      for (const auto& [id, s] : j["streams"].items()) {
        StreamInfo info;
        info.rate_hz = s.value("rate_hz", m.fps);
        info.offset_ns = s.value("offset_ns", std::int64_t{0});
        info.samples = s.value("samples", m.frames);
        info.extension = s.at("format").get<std::string>();
        if (!(info.rate_hz > 0.0) || info.samples < 0) throw DataError("manifest: bad stream '" + id + "'");
        m.streams.emplace(id, std::move(info));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.frames < 0 || !(m.fps > 0.0) || m.width <= 0 || m.height <= 0) {
    throw DataError("manifest: frames, fps and frame size must be positive");
  }
  return m;
}

std::string manifest_to_json_text(const Manifest& m) {
  nlohmann::json streams = nlohmann::json::object();
  for (const auto& [id, s] : m.streams) {
    streams[id] = {{"rate_hz", s.rate_hz}, {"offset_ns", s.offset_ns}, {"samples", s.samples}, {"format", s.extension}};
  }
  const nlohmann::json j{
      {"frames", m.frames}, {"fps", m.fps}, {"width", m.width}, {"height", m.height}, {"streams", streams}};
  return j.dump(2) + "\n";
}

Manifest load_manifest(const std::filesystem::path& dataset_dir) {
  return manifest_from_json_text(read_file_text(dataset_dir / "manifest.json"));
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& dataset_dir) {
  write_file_text(dataset_dir / "manifest.json", manifest_to_json_text(manifest));
}

std::filesystem::path rgb_frame_path(const std::filesystem::path& dir, std::int64_t frame_idx) {
  return dir / (std::to_string(frame_idx) + "_rgb.png");
}

std::filesystem::path payload_path(const std::filesystem::path& dir, std::int64_t sample, const std::string& sensor_id,
                                   const std::string& extension) {
  return dir / (std::to_string(sample) + "_" + sensor_id + "." + extension);
}

std::string payload_extension(SensorKind kind) {
  switch (kind) {
    case SensorKind::mmwave_radar: return "bin";
    case SensorKind::microphone_array: return "wav";
    case SensorKind::thermal: return "csv";
  }
  return "bin";
}

Dataset::Dataset(std::filesystem::path dir, const std::vector<SensorConfig>& sensors)
    : dir_(std::move(dir)), sensors_(sensors) {
  try {
    manifest_ = load_manifest(dir_);
  } catch (const ParseError& e) {
    throw DataError(e.what());
  }
  for (const auto& s : sensors_) {
    const auto it = manifest_.streams.find(s.sensor_id);
    if (it == manifest_.streams.end()) {
      if (manifest_.frames > 0) throw DataError("dataset has no stream for sensor '" + s.sensor_id + "'");
      continue;
    }
    const auto& ext = it->second.extension;
    const bool ok = s.kind == SensorKind::thermal ? (ext == "csv" || ext == "pgm") : ext == payload_extension(s.kind);
    if (!ok) {
      throw DataError("stream '" + s.sensor_id + "' has format '" + ext + "', which does not fit a " + to_string(s.kind));
    }
  }
}

SensorPayload Dataset::load_payload(const SensorConfig& sensor, const StreamInfo& info, std::int64_t sample) const {
  const auto path = payload_path(dir_, sample, sensor.sensor_id, info.extension);
  const auto t = info.sample_time(sample);
  try {
    switch (sensor.kind) {
      case SensorKind::mmwave_radar: {
        auto snap = load_snapshot(path);
        snap.geometry_id = sensor.sensor_id;
        return snap;
      }
      case SensorKind::microphone_array: {
        auto audio = load_wav(path);
        audio.timestamp = t;
        return audio;
      }
      case SensorKind::thermal: {
        auto frame = load_thermal(path);
        frame.timestamp = t;
        return frame;
      }
    }
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  throw DataError("unsupported sensor kind");
}

FrameBundle Dataset::load(std::int64_t frame_idx) {
  if (frame_idx < 0 || frame_idx >= manifest_.frames) {
    throw DataError("frame " + std::to_string(frame_idx) + " is outside the dataset");
  }
  FrameBundle bundle;
  bundle.frame_idx = frame_idx;
  bundle.timestamp = manifest_.frame_time(frame_idx);
  const auto rgb_path = rgb_frame_path(dir_, frame_idx);
  try {
    bundle.rgb = std::make_shared<const RgbImage>(load_png_rgb(rgb_path));
  } catch (const Error& e) {
    throw DataError(std::string(e.what()));
  }
  if (bundle.rgb->width != manifest_.width || bundle.rgb->height != manifest_.height) {
    throw DataError(rgb_path.string() + ": frame size differs from the manifest");
  }
  for (const auto& s : sensors_) {
    const auto it = manifest_.streams.find(s.sensor_id);
    if (it == manifest_.streams.end()) continue;
    const auto sample = it->second.sample_at(bundle.timestamp);
    if (!sample) continue;
    bundle.sample_index[s.sensor_id] = *sample;
    {
      std::lock_guard lock(cache_mutex_);
      const auto cached = cache_.find(s.sensor_id);
      if (cached != cache_.end() && cached->second.first == *sample) {
        bundle.payloads.emplace(s.sensor_id, cached->second.second);
        continue;
      }
    }
    auto payload = load_payload(s, it->second, *sample);
    {
      std::lock_guard lock(cache_mutex_);
      cache_.insert_or_assign(s.sensor_id, std::make_pair(*sample, payload));
    }
    bundle.payloads.emplace(s.sensor_id, std::move(payload));
  }
  return bundle;
}

}  // namespace omnifuse
