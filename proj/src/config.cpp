#include "omnifuse/config.hpp"

#include <cmath>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/http_backends.hpp"

namespace omnifuse {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return get_or<T>(j, key, T{}, where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

AngleGrid parse_grid(const json& j, const std::string& where) {
  AngleGrid grid;
  if (!j.contains("grid")) return grid;
  const auto& g = j["grid"];
  auto axis = [&](const char* key, double& lo, double& hi, int& steps) {
    if (!g.contains(key)) return;
    const auto& a = g[key];
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() ||
        !a[2].is_number_integer()) {
      throw ConfigError(where + ": grid." + key + " must be [min_deg, max_deg, steps]");
    }
    lo = a[0].get<double>();
    hi = a[1].get<double>();
    steps = a[2].get<int>();
  };
  axis("az", grid.az_min_deg, grid.az_max_deg, grid.az_steps);
  axis("el", grid.el_min_deg, grid.el_max_deg, grid.el_steps);
  try {
    grid.validate();
  } catch (const InputError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return grid;
}

SensorConfig parse_sensor(const json& j, const std::filesystem::path& base, std::size_t index) {
  SensorConfig s;
  std::string where = "sensors[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  s.sensor_id = require<std::string>(j, "sensor_id", where);
  if (s.sensor_id.empty()) throw ConfigError(where + ": empty sensor_id");
  where = "sensor '" + s.sensor_id + "'";
  try {
    s.kind = sensor_kind_from_string(require<std::string>(j, "kind", where));
    s.colormap = colormap_from_string(get_or<std::string>(
        j, "colormap", s.kind == SensorKind::thermal ? "thermal_iron" : "spectral_jet", where));
  } catch (const InputError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  s.alpha = get_or<double>(j, "alpha", 1.0, where);
  if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) throw ConfigError(where + ": alpha must be within [0, 1]");

  if (s.is_array()) {
    s.geometry_path = resolve(base, require<std::string>(j, "geometry", where));
    try {
      s.geometry = load_geometry(s.geometry_path);
    } catch (const Error& e) {
      throw ConfigError(where + ": geometry " + s.geometry_path.string() + ": " + e.what());
    }
    if (s.geometry->kind() != s.kind) {
      throw ConfigError(where + ": geometry file describes a " + to_string(s.geometry->kind()));
    }
    s.grid = parse_grid(j, where);
    s.floor_db = get_or<double>(j, "floor_db", kDefaultFloorDb, where);
    s.dynamic_range_db = get_or<double>(j, "dynamic_range_db", kDefaultDynamicRangeDb, where);
    s.speed_of_sound = get_or<double>(j, "speed_of_sound", 343.0, where);
    if (!std::isfinite(s.floor_db)) throw ConfigError(where + ": floor_db must be finite");
    if (!(s.dynamic_range_db > 0.0)) throw ConfigError(where + ": dynamic_range_db must be positive");
    if (!(s.speed_of_sound > 0.0)) throw ConfigError(where + ": speed_of_sound must be positive");
  } else {
    s.thermal_width = require<int>(j, "width", where);
    s.thermal_height = require<int>(j, "height", where);
    if (s.thermal_width <= 0 || s.thermal_height <= 0) throw ConfigError(where + ": thermal size must be positive");
    if (j.contains("t_lo")) s.thermal_lo = get_or<double>(j, "t_lo", 0.0, where);
    if (j.contains("t_hi")) s.thermal_hi = get_or<double>(j, "t_hi", 0.0, where);
    if (s.thermal_lo.has_value() != s.thermal_hi.has_value()) {
      throw ConfigError(where + ": t_lo and t_hi must be given together");
    }
    if (s.thermal_lo && !(*s.thermal_lo < *s.thermal_hi)) throw ConfigError(where + ": t_lo must be below t_hi");
  }

  if (!j.contains("calibration")) {
    throw ConfigError(where + ": no calibration file; refusing to start without one");
  }
  s.calibration_path = resolve(base, get_or<std::string>(j, "calibration", "", where));
  if (!std::filesystem::exists(s.calibration_path)) {
    throw ConfigError(where + ": calibration file " + s.calibration_path.string() +
                      " not found; refusing to start without one");
  }
  try {
    s.calibration = load_calibration(s.calibration_path);
  } catch (const Error& e) {
    throw ConfigError(where + ": calibration " + s.calibration_path.string() + ": " + e.what());
  }
  if (!s.calibration.sensor_id.empty() && s.calibration.sensor_id != s.sensor_id) {
    throw ConfigError(where + ": calibration file belongs to sensor '" + s.calibration.sensor_id + "'");
  }
  if (s.calibration.source_width != 0 &&
      (s.calibration.source_width != s.source_width() || s.calibration.source_height != s.source_height())) {
    throw ConfigError(where + ": calibration source size does not match the sensor image");
  }
  s.calibration = s.calibration.with_source(s.source_width(), s.source_height());
  s.calibration.sensor_id = s.sensor_id;
  return s;
}

MaskProviderConfig parse_mask_provider(const json& j, const std::filesystem::path& base) {
  MaskProviderConfig m;
  const std::string where = "mask_provider";
  if (!j.is_object()) throw ConfigError("missing 'mask_provider' section");
  const auto kind = get_or<std::string>(j, "kind", "stub", where);
  if (kind == "stub") {
    m.kind = MaskProviderConfig::Kind::stub;
    m.prompt = require<std::string>(j, "prompt", where);
    if (m.prompt.empty()) throw ConfigError(where + ": empty stub prompt");
    if (j.contains("mask_dir")) m.mask_dir = resolve(base, get_or<std::string>(j, "mask_dir", "", where));
  } else if (kind == "http") {
    m.kind = MaskProviderConfig::Kind::http;
    m.prompt_url = require<std::string>(j, "prompt_url", where);
    m.mask_url = get_or<std::string>(j, "mask_url", m.prompt_url, where);
  } else {
    throw ConfigError(where + ": unknown kind '" + kind + "' (expected stub or http)");
  }
  const auto refresh = get_or<double>(j, "refresh_period_ms", kDefaultRefreshPeriod.count(), where);
  const auto timeout = get_or<double>(j, "timeout_ms", kDefaultBackendTimeout.count(), where);
  if (!(refresh > 0.0) || !(timeout > 0.0)) throw ConfigError(where + ": periods must be positive");
  m.refresh_period = std::chrono::milliseconds(static_cast<std::int64_t>(refresh));
  m.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout));
  m.per_frame = get_or<bool>(j, "per_frame", false, where);
  return m;
}

json grid_json(const AngleGrid& g) {
  return {{"az", {g.az_min_deg, g.az_max_deg, g.az_steps}}, {"el", {g.el_min_deg, g.el_max_deg, g.el_steps}}};
}

json make_echo(const RunConfig& c) {
  json sensors = json::array();
  for (const auto& s : c.sensors) {
    json e{{"sensor_id", s.sensor_id},
           {"kind", to_string(s.kind)},
           {"calibration", s.calibration_path.string()},
           {"colormap", to_string(s.colormap)},
           {"alpha", s.alpha}};
    if (s.is_array()) {
      e["geometry"] = s.geometry_path.string();
      e["elements"] = s.geometry->size();
      e["wavelength_m"] = s.geometry->wavelength();
      e["grid"] = grid_json(s.grid);
      e["floor_db"] = s.floor_db;
      e["dynamic_range_db"] = s.dynamic_range_db;
      if (s.kind == SensorKind::microphone_array) e["speed_of_sound"] = s.speed_of_sound;
    } else {
      e["width"] = s.thermal_width;
      e["height"] = s.thermal_height;
      if (s.thermal_lo) {
        e["t_lo"] = *s.thermal_lo;
        e["t_hi"] = *s.thermal_hi;
      } else {
        e["t_bounds"] = "per-frame";
      }
    }
    sensors.push_back(std::move(e));
  }
  const auto& m = c.mask_provider;
  json mask{{"kind", m.kind == MaskProviderConfig::Kind::stub ? "stub" : "http"},
            {"refresh_period_ms", m.refresh_period.count()},
            {"timeout_ms", m.timeout.count()},
            {"per_frame", m.per_frame}};
  if (m.kind == MaskProviderConfig::Kind::stub) {
    mask["prompt"] = m.prompt;
    mask["mask_dir"] = m.mask_dir.string();
  } else {
    mask["prompt_url"] = m.prompt_url;
    mask["mask_url"] = m.mask_url;
  }
  return {{"task", c.task},
          {"input", c.input.string()},
          {"output", c.output.string()},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"sensors", sensors},
          {"mask_provider", mask},
          {"bench",
           {{"frames", c.bench.frames}, {"warmup", c.bench.warmup}, {"width", c.bench.width}, {"height", c.bench.height}}}};
}

}  // namespace

const char* to_string(RunMode mode) noexcept {
  switch (mode) {
    case RunMode::batch: return "batch";
    case RunMode::stream: return "stream";
    case RunMode::bench: return "bench";
  }
  return "batch";
}

RunMode run_mode_from_string(const std::string& text) {
  if (text == "batch") return RunMode::batch;
  if (text == "stream") return RunMode::stream;
  if (text == "bench") return RunMode::bench;
  throw ConfigError("unknown mode '" + text + "' (expected batch, stream or bench)");
}

const SensorConfig& RunConfig::sensor(const std::string& id) const {
  for (const auto& s : sensors) {
    if (s.sensor_id == id) return s;
  }
  throw ConfigError("no sensor '" + id + "' in the config");
}

std::pair<int, int> RunConfig::target_size() const {
  if (sensors.empty()) throw ConfigError("config has no sensors");
  return {sensors.front().calibration.target_width, sensors.front().calibration.target_height};
}

RunConfig run_config_from_json_text(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("run config: ") + e.what(),
                     line_of_offset(std::string(text), e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");

  RunConfig c;
  c.base_dir = base_dir;
  c.task = require<std::string>(j, "task", "config");
  if (c.task.empty()) throw ConfigError("config: empty task");
  c.input = resolve(base_dir, get_or<std::string>(j, "input", ".", "config"));
  c.output = resolve(base_dir, get_or<std::string>(j, "output", "out", "config"));
  c.mode = run_mode_from_string(get_or<std::string>(j, "mode", "batch", "config"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");

  if (!j.contains("sensors") || !j["sensors"].is_array() || j["sensors"].empty()) {
    throw ConfigError("config: at least one sensor is required");
  }
  for (std::size_t i = 0; i < j["sensors"].size(); ++i) {
    auto s = parse_sensor(j["sensors"][i], base_dir, i);
    for (const auto& other : c.sensors) {
      if (other.sensor_id == s.sensor_id) throw ConfigError("duplicate sensor_id '" + s.sensor_id + "'");
    }
    if (!c.sensors.empty() && (s.calibration.target_width != c.sensors.front().calibration.target_width ||
                               s.calibration.target_height != c.sensors.front().calibration.target_height)) {
      throw ConfigError("sensor '" + s.sensor_id + "': calibration target size differs from sensor '" +
                        c.sensors.front().sensor_id + "'");
    }
    c.sensors.push_back(std::move(s));
  }
  c.mask_provider = parse_mask_provider(j.contains("mask_provider") ? j["mask_provider"] : json(), base_dir);

  if (j.contains("bench")) {
    const auto& b = j["bench"];
    c.bench.frames = get_or<int>(b, "frames", c.bench.frames, "bench");
    c.bench.warmup = get_or<int>(b, "warmup", c.bench.warmup, "bench");
    c.bench.width = get_or<int>(b, "width", c.bench.width, "bench");
    c.bench.height = get_or<int>(b, "height", c.bench.height, "bench");
    if (c.bench.frames < 0 || c.bench.warmup < 0 || c.bench.width <= 0 || c.bench.height <= 0) {
      throw ConfigError("bench: frames and warmup must be >= 0 and the frame size positive");
    }
  }
  c.echo = make_echo(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file_text(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return run_config_from_json_text(text, std::filesystem::absolute(path).parent_path());
}

std::shared_ptr<PromptBackend> make_prompt_backend(const RunConfig& config) {
  const auto& m = config.mask_provider;
  if (m.kind == MaskProviderConfig::Kind::http) return std::make_shared<HttpPromptBackend>(m.prompt_url, m.timeout);
  return std::make_shared<FixedPromptBackend>(m.prompt);
}

std::shared_ptr<MaskBackend> make_mask_backend(const RunConfig& config) {
  const auto& m = config.mask_provider;
  if (m.kind == MaskProviderConfig::Kind::http) return std::make_shared<HttpMaskBackend>(m.mask_url, m.timeout);
  if (m.mask_dir.empty()) throw ConfigError("mask_provider: the stub needs a mask_dir");
  return std::make_shared<FileMaskBackend>(m.mask_dir);
}

}  // namespace omnifuse
