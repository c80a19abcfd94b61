#include "omnifuse/synth.hpp"

#include <cmath>
#include <set>

#include "omnifuse/dataset.hpp"
#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/image_io.hpp"

namespace omnifuse {

namespace {

double default_radius(const SceneSensor& s) {
  return s.kind == SensorKind::microphone_array ? 0.05 : 0.6 * s.wavelength_m;
}

using nlohmann::json;

class Fields {
 public:
  Fields(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParseError(path_ + ": expected an object");
    for (const auto& [key, value] : j_.items()) {
      if (!allowed.count(key)) throw ParseError(path_ + ": unknown field '" + key + "'");
    }
  }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ParseError(where(key) + " has the wrong type");
    }
  }

  void read_pair(const char* key, double& a, double& b) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ParseError(where(key) + " must be a two-number array");
    }
    a = v[0].get<double>();
    b = v[1].get<double>();
  }

  std::string where(const char* key) const { return path_ + "." + key; }
  const json& raw() const noexcept { return j_; }

 private:
  const json& j_;
  std::string path_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ParseError(what);
}

SceneSensor parse_sensor(const json& j, const std::string& path) {
  const Fields f(j, path,
                 {"sensor_id", "kind", "elements", "radius_m", "wavelength_m", "snr_db", "tone_hz", "sample_rate",
                  "block", "width", "height", "ambient_c", "noise_std", "rotation_deg", "translate_px", "colormap",
                  "alpha"});
  SceneSensor s;
  f.read("sensor_id", s.sensor_id);
  require(!s.sensor_id.empty(), path + ".sensor_id is required");
  std::string kind;
  f.read("kind", kind);
  try {
    s.kind = sensor_kind_from_string(kind);
  } catch (const InputError&) {
    throw ParseError(f.where("kind") + ": unknown sensor kind '" + kind + "'");
  }
  s.colormap = s.kind == SensorKind::thermal ? ColormapName::thermal_iron : ColormapName::spectral_jet;
  f.read("elements", s.elements);
  f.read("radius_m", s.radius_m);
  f.read("wavelength_m", s.wavelength_m);
  f.read("snr_db", s.snr_db);
  f.read("tone_hz", s.tone_hz);
  f.read("sample_rate", s.sample_rate);
  f.read("block", s.block);
  f.read("width", s.width);
  f.read("height", s.height);
  f.read("ambient_c", s.ambient_c);
  f.read("noise_std", s.noise_std);
  f.read("rotation_deg", s.rotation_deg);
  f.read("alpha", s.alpha);
  f.read_pair("translate_px", s.translate_x, s.translate_y);
  if (j.contains("colormap")) {
    std::string name;
    f.read("colormap", name);
    try {
      s.colormap = colormap_from_string(name);
    } catch (const InputError& e) {
      throw ParseError(f.where("colormap") + ": " + e.what());
    }
  }
  if (s.radius_m == 0.0) s.radius_m = default_radius(s);
  require(s.elements >= 2, f.where("elements") + " must be >= 2");
  require(s.radius_m > 0.0 && s.wavelength_m > 0.0, path + ": radius and wavelength must be positive");
  require(s.sample_rate > 0.0 && s.tone_hz > 0.0 && s.tone_hz < s.sample_rate / 2.0,
          path + ": tone must lie below the Nyquist frequency");
  require(s.block >= 64, f.where("block") + " must be >= 64");
  require(s.width > 0 && s.height > 0, path + ": thermal size must be positive");
  require(s.noise_std >= 0.0, f.where("noise_std") + " must be >= 0");
  require(s.alpha >= 0.0 && s.alpha <= 1.0, f.where("alpha") + " must be within [0, 1]");
  return s;
}

SceneTarget parse_target(const json& j, const std::string& path) {
  const Fields f(j, path,
                 {"name", "azimuth_deg", "elevation_deg", "rate_deg_s", "box_px", "sound", "radar", "temperature_c",
                  "color"});
  SceneTarget t;
  f.read("name", t.name);
  f.read("azimuth_deg", t.azimuth_deg);
  f.read("elevation_deg", t.elevation_deg);
  f.read_pair("rate_deg_s", t.azimuth_rate_deg_s, t.elevation_rate_deg_s);
  double bw = t.box_width, bh = t.box_height;
  f.read_pair("box_px", bw, bh);
  t.box_width = static_cast<int>(bw);
  t.box_height = static_cast<int>(bh);
  f.read("sound", t.sound);
  f.read("radar", t.radar);
  f.read("temperature_c", t.temperature_c);
  if (j.contains("color")) {
    std::vector<int> c;
    f.read("color", c);
    require(c.size() == 3 && std::all_of(c.begin(), c.end(), [](int v) { return v >= 0 && v <= 255; }),
            f.where("color") + " must be [r, g, b] with 0..255 entries");
    t.color = {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]), static_cast<std::uint8_t>(c[2])};
  }
  require(std::abs(t.azimuth_deg) < 90.0 && std::abs(t.elevation_deg) < 90.0,
          path + ": target direction must lie in the front hemisphere");
  require(t.box_width > 0 && t.box_height > 0, f.where("box_px") + " must be positive");
  require(t.sound >= 0.0 && t.radar >= 0.0, path + ": amplitudes must be >= 0");
  return t;
}

double gaussian_blob(double dx, double dy, double sx, double sy) {
  return std::exp(-0.5 * ((dx * dx) / (sx * sx) + (dy * dy) / (sy * sy)));
}

}  // namespace

Scene scene_from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene: ") + e.what(), line_of_offset(std::string(text), e.byte > 0 ? e.byte - 1 : 0));
  }
  const Fields f(j, "scene",
                 {"frames", "fps", "width", "height", "task", "prompt", "field_of_view", "sensors", "targets"});
  Scene s;
  f.read("frames", s.frames);
  f.read("fps", s.fps);
  f.read("width", s.width);
  f.read("height", s.height);
  f.read("task", s.task);
  f.read("prompt", s.prompt);
  require(s.frames >= 0, "scene.frames must be >= 0");
  require(s.fps > 0.0, "scene.fps must be positive");
  require(s.width > 0 && s.height > 0, "scene: frame size must be positive");
  require(!s.task.empty() && !s.prompt.empty(), "scene: task and prompt must not be empty");
  if (j.contains("field_of_view")) {
    const Fields fov(j["field_of_view"], "scene.field_of_view", {"az", "el"});
    auto axis = [&](const char* key, double& lo, double& hi, int& steps) {
      if (!fov.raw().contains(key)) return;
      const auto& a = fov.raw()[key];
      require(a.is_array() && a.size() == 3 && a[0].is_number() && a[1].is_number() && a[2].is_number_integer(),
              fov.where(key) + " must be [min_deg, max_deg, steps]");
      lo = a[0].get<double>();
      hi = a[1].get<double>();
      steps = a[2].get<int>();
    };
    axis("az", s.field_of_view.az_min_deg, s.field_of_view.az_max_deg, s.field_of_view.az_steps);
    axis("el", s.field_of_view.el_min_deg, s.field_of_view.el_max_deg, s.field_of_view.el_steps);
    try {
      s.field_of_view.validate();
    } catch (const InputError& e) {
      throw ParseError(std::string("scene.field_of_view: ") + e.what());
    }
  }
  if (j.contains("sensors")) {
    require(j["sensors"].is_array(), "scene.sensors must be an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["sensors"].size(); ++i) {
      auto sensor = parse_sensor(j["sensors"][i], "scene.sensors[" + std::to_string(i) + "]");
      require(ids.insert(sensor.sensor_id).second, "scene: duplicate sensor_id '" + sensor.sensor_id + "'");
      s.sensors.push_back(std::move(sensor));
    }
  }
  if (j.contains("targets")) {
    require(j["targets"].is_array(), "scene.targets must be an array");
    for (std::size_t i = 0; i < j["targets"].size(); ++i) {
      s.targets.push_back(parse_target(j["targets"][i], "scene.targets[" + std::to_string(i) + "]"));
    }
  }
  return s;
}

Scene load_scene(const std::filesystem::path& path) { return scene_from_json_text(read_file_text(path)); }

CalibrationTransform camera_calibration(const AngleGrid& fov, int width, int height) {
  CalibrationTransform t;
  t.scale_x = static_cast<double>(width) / fov.az_steps;
  t.scale_y = static_cast<double>(height) / fov.el_steps;
  t.target_width = width;
  t.target_height = height;
  t.crop = {0, 0, width, height};
  return t.with_source(fov.az_steps, fov.el_steps);
}

CalibrationTransform sensor_calibration(const Scene& scene, const SceneSensor& sensor) {
  CalibrationTransform t;
  if (sensor.kind == SensorKind::thermal) {
    t.scale_x = static_cast<double>(scene.width) / sensor.width;
    t.scale_y = static_cast<double>(scene.height) / sensor.height;
    t.target_width = scene.width;
    t.target_height = scene.height;
    t.crop = {0, 0, scene.width, scene.height};
    t = t.with_source(sensor.width, sensor.height);
  } else {
    t = camera_calibration(scene.field_of_view, scene.width, scene.height);
  }
  t.sensor_id = sensor.sensor_id;
  t.rotation_deg = sensor.rotation_deg;
  t.translate_x = sensor.translate_x;
  t.translate_y = sensor.translate_y;
  return t;
}

Point2 direction_to_pixel(const Scene& scene, double azimuth_deg, double elevation_deg) {
  return map_point(camera_calibration(scene.field_of_view, scene.width, scene.height),
                   scene.field_of_view.to_pixel(azimuth_deg, elevation_deg));
}

std::vector<TargetTruth> targets_at(const Scene& scene, std::int64_t frame_idx) {
  const double t = static_cast<double>(frame_idx) / scene.fps;
  std::vector<TargetTruth> out;
  for (const auto& target : scene.targets) {
    TargetTruth truth;
    truth.name = target.name;
    truth.azimuth_deg = target.azimuth_deg + target.azimuth_rate_deg_s * t;
    truth.elevation_deg = target.elevation_deg + target.elevation_rate_deg_s * t;
    truth.centroid_px = direction_to_pixel(scene, truth.azimuth_deg, truth.elevation_deg);
    const int x0 = static_cast<int>(std::lround(truth.centroid_px.x - target.box_width / 2.0));
    const int y0 = static_cast<int>(std::lround(truth.centroid_px.y - target.box_height / 2.0));
    const int x1 = std::clamp(x0 + target.box_width, 0, scene.width);
    const int y1 = std::clamp(y0 + target.box_height, 0, scene.height);
    const int cx0 = std::clamp(x0, 0, scene.width), cy0 = std::clamp(y0, 0, scene.height);
    truth.box = {cx0, cy0, x1 - cx0, y1 - cy0};
    out.push_back(std::move(truth));
  }
  return out;
}

Bitmap truth_mask(const Scene& scene, std::span<const TargetTruth> targets) {
  Bitmap bits(scene.width, scene.height);
  for (const auto& t : targets) {
    for (int y = t.box.y; y < t.box.y + t.box.h; ++y)
      for (int x = t.box.x; x < t.box.x + t.box.w; ++x) bits.at(x, y) = 1;
  }
  return bits;
}

ArrayGeometry scene_geometry(const SceneSensor& sensor) {
  const double wavelength =
      sensor.kind == SensorKind::microphone_array ? kSpeedOfSound / sensor.tone_hz : sensor.wavelength_m;
  const double radius = sensor.radius_m == 0.0 ? default_radius(sensor) : sensor.radius_m;
  return circular_array(sensor.elements, radius, wavelength, sensor.kind);
}

double tone_noise_std(double amplitude, double snr_db) {
  return amplitude / (std::sqrt(2.0) * std::pow(10.0, snr_db / 20.0));
}

AudioBlock synthesize_tone_block(const ArrayGeometry& geometry, std::span<const PointSource> sources, double tone_hz,
                                 double sample_rate, int samples, double noise_std, std::uint64_t seed) {
  if (!(tone_hz > 0.0) || !(sample_rate > 0.0) || samples <= 0 || !(noise_std >= 0.0)) {
    throw InputError("tone block needs positive tone, rate and length and noise >= 0");
  }
  const double wavelength = kSpeedOfSound / tone_hz;
  AudioBlock block;
  block.sample_rate = sample_rate;
  block.channels.assign(geometry.size(), std::vector<double>(static_cast<std::size_t>(samples), 0.0));
  const double w = 2.0 * kPi * tone_hz / sample_rate;
  for (const auto& src : sources) {
    for (std::size_t k = 0; k < geometry.size(); ++k) {
      const double phase = steering_phase(geometry.elements()[k], wavelength, deg_to_rad(src.azimuth_deg),
                                          deg_to_rad(src.elevation_deg)) +
                           src.phase_offset_rad;
      auto& ch = block.channels[k];
      for (int n = 0; n < samples; ++n) ch[static_cast<std::size_t>(n)] += src.amplitude * std::cos(w * n + phase);
    }
  }
  if (noise_std > 0.0) {
    GaussianSource noise(seed);
    for (auto& ch : block.channels)
      for (auto& v : ch) v += noise_std * noise.next();
  }
  return block;
}

std::vector<PointSource> sensor_sources(const Scene& scene, const SceneSensor& sensor,
                                        std::span<const TargetTruth> targets) {
  const auto calib = sensor_calibration(scene, sensor);
  std::vector<PointSource> out;
  for (std::size_t i = 0; i < targets.size() && i < scene.targets.size(); ++i) {
    const double amplitude =
        sensor.kind == SensorKind::microphone_array ? 0.5 * scene.targets[i].sound : scene.targets[i].radar;
    if (amplitude <= 0.0) continue;
    const Point2 p = unmap_point(calib, targets[i].centroid_px);
    const double az = scene.field_of_view.azimuth_at_pixel(p.x);
    const double el = scene.field_of_view.elevation_at_pixel(p.y);
    if (std::abs(az) >= 90.0 || std::abs(el) >= 90.0) continue;
    out.push_back({az, el, amplitude, 0.7 * static_cast<double>(i)});
  }
  return out;
}

RgbImage render_rgb(const Scene& scene, std::span<const TargetTruth> targets, std::uint64_t seed) {
  RgbImage img(scene.width, scene.height);
  GaussianSource noise(seed);
  for (int y = 0; y < scene.height; ++y) {
    const double v = static_cast<double>(y) / std::max(1, scene.height - 1);
    for (int x = 0; x < scene.width; ++x) {
      const double u = static_cast<double>(x) / std::max(1, scene.width - 1);
      const double base[3] = {120.0 + 60.0 * v, 130.0 + 40.0 * u, 150.0 - 50.0 * v + 20.0 * u};
      auto* p = img.at(x, y);
      for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::clamp(std::floor(base[c] + 3.0 * noise.next() + 0.5), 0.0, 255.0));
    }
  }
  for (std::size_t i = 0; i < targets.size() && i < scene.targets.size(); ++i) {
    const auto& box = targets[i].box;
    for (int y = box.y; y < box.y + box.h; ++y)
      for (int x = box.x; x < box.x + box.w; ++x) std::copy_n(scene.targets[i].color.data(), 3, img.at(x, y));
  }
  return img;
}

ThermalFrame render_thermal(const Scene& scene, const SceneSensor& sensor, std::span<const TargetTruth> targets,
                            std::uint64_t seed) {
  const auto calib = sensor_calibration(scene, sensor);
  ThermalFrame frame{sensor.width, sensor.height,
                     std::vector<double>(static_cast<std::size_t>(sensor.width) * sensor.height, sensor.ambient_c), 0};
  for (int v = 0; v < sensor.height; ++v) {
    for (int u = 0; u < sensor.width; ++u) {
      const Point2 p = map_point(calib, {u + 0.5, v + 0.5});
      double value = sensor.ambient_c;
      for (std::size_t i = 0; i < targets.size() && i < scene.targets.size(); ++i) {
        const auto& target = scene.targets[i];
        value += (target.temperature_c - sensor.ambient_c) *
                 gaussian_blob(p.x - targets[i].centroid_px.x, p.y - targets[i].centroid_px.y,
                               target.box_width / 4.0, target.box_height / 4.0);
      }
      frame.values[static_cast<std::size_t>(v) * sensor.width + u] = value;
    }
  }
  if (sensor.noise_std > 0.0) {
    GaussianSource noise(seed);
    for (auto& value : frame.values) value += sensor.noise_std * noise.next();
  }
  return frame;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  // splitmix64 over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void make_synthetic_dataset(const Scene& scene, const std::filesystem::path& out_dir, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "masks");
  fs::create_directories(out_dir / "calib");
  fs::create_directories(out_dir / "geometry");

  Manifest manifest;
  manifest.frames = scene.frames;
  manifest.fps = scene.fps;
  manifest.width = scene.width;
  manifest.height = scene.height;
  std::vector<std::optional<ArrayGeometry>> geometries;
  json config_sensors = json::array();
  for (const auto& s : scene.sensors) {
    const auto ext = payload_extension(s.kind);
    manifest.streams[s.sensor_id] = StreamInfo{scene.fps, 0, scene.frames, ext};
    save_calibration(sensor_calibration(scene, s), out_dir / "calib" / (s.sensor_id + ".json"));
    json entry{{"sensor_id", s.sensor_id},
               {"kind", to_string(s.kind)},
               {"calibration", "calib/" + s.sensor_id + ".json"},
               {"colormap", to_string(s.colormap)},
               {"alpha", s.alpha}};
    if (s.kind == SensorKind::thermal) {
      geometries.emplace_back();
      entry["width"] = s.width;
      entry["height"] = s.height;
    } else {
      geometries.emplace_back(scene_geometry(s));
      save_geometry(*geometries.back(), out_dir / "geometry" / (s.sensor_id + ".json"));
      const auto& g = scene.field_of_view;
      entry["geometry"] = "geometry/" + s.sensor_id + ".json";
      entry["grid"] = {{"az", {g.az_min_deg, g.az_max_deg, g.az_steps}}, {"el", {g.el_min_deg, g.el_max_deg, g.el_steps}}};
    }
    config_sensors.push_back(std::move(entry));
  }
  save_manifest(manifest, out_dir);

  json truth_frames = json::array();
  for (std::int64_t idx = 0; idx < scene.frames; ++idx) {
    const auto targets = targets_at(scene, idx);
    const auto t_ns = manifest.frame_time(idx);
    save_png(render_rgb(scene, targets, mix_seed(seed, static_cast<std::uint64_t>(idx), 0)), rgb_frame_path(out_dir, idx));
    save_mask_png(truth_mask(scene, targets), out_dir / "masks" / (std::to_string(idx) + ".png"));
    for (std::size_t si = 0; si < scene.sensors.size(); ++si) {
      const auto& s = scene.sensors[si];
      const auto stream_seed = mix_seed(seed, static_cast<std::uint64_t>(idx), si + 1);
      const auto path = payload_path(out_dir, idx, s.sensor_id, payload_extension(s.kind));
      if (s.kind == SensorKind::thermal) {
        save_thermal_csv(render_thermal(scene, s, targets, stream_seed), path);
        continue;
      }
      const auto sources = sensor_sources(scene, s, targets);
      double strongest = 0.0;
      for (const auto& src : sources) strongest = std::max(strongest, src.amplitude);
      if (s.kind == SensorKind::mmwave_radar) {
        auto snap = simulate_snapshot(*geometries[si], sources, strongest > 0.0 ? noise_std_for_snr(strongest, s.snr_db) : 0.01,
                                      stream_seed);
        snap.timestamp = t_ns;
        save_snapshot(snap, path);
      } else {
        auto block = synthesize_tone_block(*geometries[si], sources, s.tone_hz, s.sample_rate, s.block,
                                           tone_noise_std(strongest > 0.0 ? strongest : 0.01, s.snr_db), stream_seed);
        block.timestamp = t_ns;
        save_wav(block, path);
      }
    }
    json tj = json::array();
    for (const auto& t : targets) {
      tj.push_back({{"name", t.name},
                    {"azimuth_deg", t.azimuth_deg},
                    {"elevation_deg", t.elevation_deg},
                    {"centroid_px", {t.centroid_px.x, t.centroid_px.y}},
                    {"box", {t.box.x, t.box.y, t.box.w, t.box.h}}});
    }
    truth_frames.push_back({{"frame_idx", idx}, {"timestamp_ns", t_ns}, {"targets", tj}});
  }
  write_file_text(out_dir / "truth.json", json{{"seed", seed}, {"frames", truth_frames}}.dump(2) + "\n");

  if (!scene.sensors.empty()) {
    const json config{{"task", scene.task},
                      {"input", "."},
                      {"output", "out"},
                      {"mode", "batch"},
                      {"seed", seed},
                      {"sensors", config_sensors},
                      {"mask_provider", {{"kind", "stub"}, {"prompt", scene.prompt}, {"mask_dir", "masks"}}}};
    write_file_text(out_dir / "config.json", config.dump(2) + "\n");
  }
}

}  // namespace omnifuse
