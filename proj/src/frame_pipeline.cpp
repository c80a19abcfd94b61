#include "omnifuse/frame_pipeline.hpp"

#include <chrono>

#include "omnifuse/audio.hpp"
#include "omnifuse/error.hpp"

namespace omnifuse {

namespace {

class StageClock {
 public:
  explicit StageClock(double* slot) : slot_(slot), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    if (slot_) *slot_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  double* slot_;
  std::chrono::steady_clock::time_point start_;
};

double* slot(StageTimes* t, double StageTimes::*member) { return t ? &(t->*member) : nullptr; }

std::string shape(int w, int h) { return std::to_string(h) + "x" + std::to_string(w); }

}  // namespace

FramePipeline::FramePipeline(std::vector<SensorConfig> sensors) : sensors_(std::move(sensors)) {
  if (sensors_.empty()) throw ConfigError("pipeline needs at least one sensor");
  for (std::size_t i = 0; i < sensors_.size(); ++i) {
    auto& s = sensors_[i];
    for (std::size_t k = 0; k < i; ++k) {
      if (sensors_[k].sensor_id == s.sensor_id) throw ConfigError("duplicate sensor_id '" + s.sensor_id + "'");
    }
    if (s.is_array() && !s.geometry) throw ConfigError("sensor '" + s.sensor_id + "': no array geometry");
    if (s.calibration.source_width == 0) s.calibration = s.calibration.with_source(s.source_width(), s.source_height());
    try {
      s.calibration.validate();
      if (s.is_array()) s.grid.validate();
    } catch (const InputError& e) {
      throw ConfigError("sensor '" + s.sensor_id + "': " + e.what());
    }
    if (i == 0) {
      width_ = s.calibration.target_width;
      height_ = s.calibration.target_height;
    } else if (s.calibration.target_width != width_ || s.calibration.target_height != height_) {
      throw ConfigError("sensor '" + s.sensor_id + "': calibration target size differs from the other sensors");
    }
    colormaps_.emplace(s.sensor_id, Colormap(s.colormap));
    if (s.kind == SensorKind::mmwave_radar) table_for(s, s.geometry->wavelength());
  }
}

FramePipeline FramePipeline::from_config_file(const std::filesystem::path& path) {
  return FramePipeline(load_run_config(path));
}

const SensorConfig& FramePipeline::sensor(const std::string& sensor_id) const {
  for (const auto& s : sensors_) {
    if (s.sensor_id == sensor_id) return s;
  }
  throw InputError("unknown sensor '" + sensor_id + "'");
}

std::shared_ptr<const SteeringTable> FramePipeline::table_for(const SensorConfig& sensor, double wavelength) const {
  const auto key = std::make_pair(sensor.sensor_id, wavelength);
  std::lock_guard lock(tables_mutex_);
  auto it = tables_.find(key);
  if (it == tables_.end()) {
    auto table = std::make_shared<const SteeringTable>(sensor.geometry->with_wavelength(wavelength), sensor.grid);
    it = tables_.emplace(key, std::move(table)).first;
  }
  return it->second;
}

Heatmap FramePipeline::beamform_frame(const std::string& sensor_id, std::span<const Complex> samples) const {
  const auto& s = sensor(sensor_id);
  if (!s.is_array()) throw InputError("sensor '" + sensor_id + "' is not an array");
  if (samples.size() != s.geometry->size()) {
    throw InputError("sensor '" + sensor_id + "': " + std::to_string(samples.size()) + " samples for a " +
                     std::to_string(s.geometry->size()) + "-element array");
  }
  ArraySnapshot snap{sensor_id, {samples.begin(), samples.end()}, 0};
  return table_for(s, s.geometry->wavelength())->beamform(snap, s.floor_db);
}

SensorImage FramePipeline::render_array(const SensorConfig& s, const ArraySnapshot& snapshot, double wavelength,
                                        StageTimes* times) const {
  SensorImage out;
  out.sensor_id = s.sensor_id;
  out.wavelength_m = wavelength;
  out.timestamp = snapshot.timestamp;
  {
    StageClock clock(slot(times, &StageTimes::sensor_ms));
    if (snapshot.samples.size() != s.geometry->size()) {
      throw InputError("sensor '" + s.sensor_id + "': snapshot has " + std::to_string(snapshot.samples.size()) +
                       " samples, geometry has " + std::to_string(s.geometry->size()) + " elements");
    }
    out.heatmap = table_for(s, wavelength)->beamform(snapshot, s.floor_db);
  }
  RgbImage colored;
  {
    StageClock clock(slot(times, &StageTimes::colorize_ms));
    colored = colorize(normalize(*out.heatmap, s.dynamic_range_db), colormaps_.at(s.sensor_id));
  }
  {
    StageClock clock(slot(times, &StageTimes::calibrate_ms));
    out.calibrated = calibrate(colored, s.calibration);
  }
  const auto peak = out.heatmap->argmax();
  out.peak_px = map_point(s.calibration, {peak.col + 0.5, peak.row + 0.5});
  return out;
}

SensorImage FramePipeline::render(const std::string& sensor_id, const SensorPayload& payload,
                                  StageTimes* times) const {
  const auto& s = sensor(sensor_id);
  try {
    if (s.kind == SensorKind::mmwave_radar) {
      const auto* snap = std::get_if<ArraySnapshot>(&payload);
      if (!snap) throw InputError("expected an array snapshot");
      return render_array(s, *snap, s.geometry->wavelength(), times);
    }
    if (s.kind == SensorKind::microphone_array) {
      if (const auto* snap = std::get_if<ArraySnapshot>(&payload)) {
        return render_array(s, *snap, s.geometry->wavelength(), times);
      }
      const auto* audio = std::get_if<AudioBlock>(&payload);
      if (!audio) throw InputError("expected an audio block or snapshot");
      if (audio->channels.size() != s.geometry->size()) {
        throw InputError("audio has " + std::to_string(audio->channels.size()) + " channels, geometry has " +
                         std::to_string(s.geometry->size()) + " elements");
      }
      DominantBin bin;
      ArraySnapshot snap;
      double spectral_ms = 0.0;
      {
        StageClock clock(&spectral_ms);
        bin = find_dominant_bin(*audio, s.speed_of_sound);
        snap = audio_to_snapshot(*audio, bin.bin);
      }
      snap.timestamp = audio->timestamp;
      auto out = render_array(s, snap, bin.wavelength_m, times);
      if (times) times->sensor_ms += spectral_ms;
      return out;
    }
    const auto* frame = std::get_if<ThermalFrame>(&payload);
    if (!frame) throw InputError("expected a thermal frame");
    if (frame->width != s.thermal_width || frame->height != s.thermal_height) {
      throw InputError("thermal frame is " + shape(frame->width, frame->height) + ", config expects " +
                       shape(s.thermal_width, s.thermal_height));
    }
    SensorImage out;
    out.sensor_id = s.sensor_id;
    out.timestamp = frame->timestamp;
    ScalarImage unit;
    {
      StageClock clock(slot(times, &StageTimes::sensor_ms));
      frame->validate();
      const auto bounds = s.thermal_lo ? ThermalBounds{*s.thermal_lo, *s.thermal_hi} : frame_bounds(*frame);
      unit = normalize_thermal(*frame, bounds.lo, bounds.hi);
    }
    RgbImage colored;
    {
      StageClock clock(slot(times, &StageTimes::colorize_ms));
      colored = colorize(unit, colormaps_.at(s.sensor_id));
    }
    {
      StageClock clock(slot(times, &StageTimes::calibrate_ms));
      out.calibrated = calibrate(colored, s.calibration);
    }
    const auto hottest = std::max_element(frame->values.begin(), frame->values.end()) - frame->values.begin();
    out.peak_px = map_point(s.calibration, {static_cast<double>(hottest % frame->width) + 0.5,
                                            static_cast<double>(hottest / frame->width) + 0.5});
    return out;
  } catch (const Error& e) {
    if (std::string_view(e.what()).find("sensor '" + sensor_id + "'") != std::string_view::npos) throw;
    throw InputError("sensor '" + sensor_id + "': " + e.what());
  }
}

SensorMaskedImage FramePipeline::fuse(const SensorImage& image, const RgbImage& rgb, const SegMask& mask,
                                      StageTimes* times) const {
  const auto& s = sensor(image.sensor_id);
  StageClock clock(slot(times, &StageTimes::blend_ms));
  try {
    auto out = blend(rgb, image.calibrated.image, image.calibrated.validity, mask, s.alpha);
    out.sensor_id = s.sensor_id;
    return out;
  } catch (const InputError& e) {
    throw InputError("sensor '" + s.sensor_id + "': " + e.what());
  }
}

std::map<std::string, RgbImage> FramePipeline::fuse_frame(const RgbImage& rgb,
                                                          const std::map<std::string, SensorPayload>& payloads,
                                                          const std::map<std::string, Bitmap>& masks,
                                                          const std::map<std::string, double>& alpha) const {
  rgb.validate();
  if (rgb.width != width_ || rgb.height != height_) {
    throw InputError("rgb frame is " + shape(rgb.width, rgb.height) + ", calibrations target " +
                     shape(width_, height_));
  }
  std::map<std::string, RgbImage> out;
  for (const auto& [id, payload] : payloads) {
    const auto& s = sensor(id);
    const auto m = masks.find(id);
    if (m == masks.end()) throw InputError("sensor '" + id + "': no mask");
    if (m->second.width != rgb.width || m->second.height != rgb.height) {
      throw InputError("sensor '" + id + "': mask is " + shape(m->second.width, m->second.height) + ", rgb is " +
                       shape(rgb.width, rgb.height));
    }
    SegMask mask;
    mask.bits = m->second;
    try {
      mask.validate(rgb.width, rgb.height);
    } catch (const ProtocolError& e) {
      throw InputError("sensor '" + id + "': " + e.what());
    }
    const auto a = alpha.find(id);
    const double used_alpha = a == alpha.end() ? s.alpha : a->second;
    const auto image = render(id, payload);
    try {
      out.emplace(id, blend(rgb, image.calibrated.image, image.calibrated.validity, mask, used_alpha).image);
    } catch (const InputError& e) {
      throw InputError("sensor '" + id + "': " + e.what());
    }
  }
  return out;
}

}  // namespace omnifuse
