#include "omnifuse/imaging.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"

namespace omnifuse {

namespace {

std::uint8_t to_byte(double v) noexcept {
  return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
}

struct Stop {
  double t;
  double r, g, b;
};

// Black through violet, red, orange and yellow to white.
constexpr Stop kIronStops[] = {
    {0.00, 0, 0, 0},       {0.15, 30, 0, 90},    {0.35, 130, 0, 150}, {0.55, 220, 40, 60},
    {0.75, 250, 140, 0},   {0.90, 255, 220, 60}, {1.00, 255, 255, 255},
};

Rgb iron(double t) {
  for (std::size_t i = 1; i < std::size(kIronStops); ++i) {
    const auto& a = kIronStops[i - 1];
    const auto& b = kIronStops[i];
    if (t <= b.t) {
      const double f = (t - a.t) / (b.t - a.t);
      return {to_byte(a.r + f * (b.r - a.r)), to_byte(a.g + f * (b.g - a.g)), to_byte(a.b + f * (b.b - a.b))};
    }
  }
  return {255, 255, 255};
}

Rgb jet(double t) {
  auto channel = [t](double centre) { return to_byte(255.0 * std::clamp(1.5 - std::abs(4.0 * t - centre), 0.0, 1.0)); };
  return {channel(3.0), channel(2.0), channel(1.0)};
}

struct Affine {
  // target = offset + m * source
  double m00, m01, m10, m11;
  double ox, oy;
};

Affine linear_part(const CalibrationTransform& t) {
  const double a = deg_to_rad(t.rotation_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  // R = [[c, -s], [s, c]], S = diag(sx, sy)
  if (t.scale_first) return {c * t.scale_x, -s * t.scale_y, s * t.scale_x, c * t.scale_y, 0.0, 0.0};
  return {t.scale_x * c, -t.scale_x * s, t.scale_y * s, t.scale_y * c, 0.0, 0.0};
}

Affine inverted(const Affine& f) {
  const double det = f.m00 * f.m11 - f.m01 * f.m10;
  Affine inv{f.m11 / det, -f.m01 / det, -f.m10 / det, f.m00 / det, 0.0, 0.0};
  inv.ox = -(inv.m00 * f.ox + inv.m01 * f.oy);
  inv.oy = -(inv.m10 * f.ox + inv.m11 * f.oy);
  return inv;
}

/// Full forward affine for a given source size.
Affine forward_affine(const CalibrationTransform& t, double src_w, double src_h) {
  Affine f = linear_part(t);
  const double csx = src_w / 2.0;
  const double csy = src_h / 2.0;
  f.ox = t.target_width / 2.0 + t.translate_x - (f.m00 * csx + f.m01 * csy);
  f.oy = t.target_height / 2.0 + t.translate_y - (f.m10 * csx + f.m11 * csy);
  return f;
}

Point2 apply(const Affine& f, Point2 p) noexcept {
  return {f.ox + f.m00 * p.x + f.m01 * p.y, f.oy + f.m10 * p.x + f.m11 * p.y};
}

template <int Channels, typename Sample, typename Out>
void resample(const Sample* src, int src_w, int src_h, const CalibrationTransform& t,
              const Bitmap* source_validity, Out* dst, Bitmap& validity) {
  const Affine back = inverted(forward_affine(t, src_w, src_h));
  constexpr double kEdge = 1e-9;
  for (int y = 0; y < t.target_height; ++y) {
    for (int x = 0; x < t.target_width; ++x) {
      if (!t.crop.contains(x, y)) continue;
      const Point2 p = apply(back, {x + 0.5, y + 0.5});
      if (p.x < -kEdge || p.y < -kEdge || p.x > src_w + kEdge || p.y > src_h + kEdge) continue;
      const double u = std::clamp(p.x - 0.5, 0.0, static_cast<double>(src_w - 1));
      const double v = std::clamp(p.y - 0.5, 0.0, static_cast<double>(src_h - 1));
      const int x0 = static_cast<int>(u);
      const int y0 = static_cast<int>(v);
      const int x1 = std::min(x0 + 1, src_w - 1);
      const int y1 = std::min(y0 + 1, src_h - 1);
      const double fx = u - x0;
      const double fy = v - y0;
      const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
      if (source_validity != nullptr) {
        const bool ok = (w00 == 0 || source_validity->at(x0, y0)) && (w10 == 0 || source_validity->at(x1, y0)) &&
                        (w01 == 0 || source_validity->at(x0, y1)) && (w11 == 0 || source_validity->at(x1, y1));
        if (!ok) continue;
      }
      const std::size_t i00 = (static_cast<std::size_t>(y0) * src_w + x0) * Channels;
      const std::size_t i10 = (static_cast<std::size_t>(y0) * src_w + x1) * Channels;
      const std::size_t i01 = (static_cast<std::size_t>(y1) * src_w + x0) * Channels;
      const std::size_t i11 = (static_cast<std::size_t>(y1) * src_w + x1) * Channels;
      const std::size_t o = (static_cast<std::size_t>(y) * t.target_width + x) * Channels;
      for (int c = 0; c < Channels; ++c) {
        const double value = w00 * src[i00 + c] + w10 * src[i10 + c] + w01 * src[i01 + c] + w11 * src[i11 + c];
        if constexpr (std::is_same_v<Out, std::uint8_t>) {
          dst[o + c] = static_cast<std::uint8_t>(std::floor(value + 0.5));
        } else {
          dst[o + c] = value;
        }
      }
      validity.at(x, y) = 1;
    }
  }
}

void check_source_validity(const Bitmap* v, int w, int h) {
  if (v != nullptr && (v->width != w || v->height != h)) {
    throw InputError("source validity matrix does not match sensor image size");
  }
}

std::vector<double> json_numbers(const nlohmann::json& j, const char* key, std::size_t n) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != n) {
    throw ParseError(std::string("calibration field '") + key + "' must have " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(v.get<double>());
  return out;
}

}  // namespace

const char* to_string(ColormapName name) noexcept {
  switch (name) {
    case ColormapName::thermal_iron: return "thermal_iron";
    case ColormapName::spectral_jet: return "spectral_jet";
    case ColormapName::grayscale: return "grayscale";
  }
  return "unknown";
}

ColormapName colormap_from_string(std::string_view name) {
  if (name == "thermal_iron") return ColormapName::thermal_iron;
  if (name == "spectral_jet") return ColormapName::spectral_jet;
  if (name == "grayscale") return ColormapName::grayscale;
  throw InputError("unknown colormap '" + std::string(name) + "'");
}

Colormap::Colormap(ColormapName name) : name_(name) {
  for (std::size_t i = 0; i < 256; ++i) {
    const double t = static_cast<double>(i) / 255.0;
    switch (name) {
      case ColormapName::grayscale:
        table_[i] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i)};
        break;
      case ColormapName::spectral_jet: table_[i] = jet(t); break;
      case ColormapName::thermal_iron: table_[i] = iron(t); break;
    }
  }
}

std::size_t Colormap::index_of(double v) noexcept {
  return static_cast<std::size_t>(std::floor(v * 255.0 + 0.5));
}

RgbImage colorize(const ScalarImage& values, const Colormap& colormap) {
  if (values.values.size() != static_cast<std::size_t>(values.width) * static_cast<std::size_t>(values.height)) {
    throw InputError("value matrix size does not match its dimensions");
  }
  RgbImage out(values.width, values.height);
  std::uint8_t* dst = out.pixels.data();
  for (double v : values.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("colorize input outside [0, 1]: " + std::to_string(v));
    const Rgb& c = colormap[Colormap::index_of(v)];
    *dst++ = c.r;
    *dst++ = c.g;
    *dst++ = c.b;
  }
  return out;
}

ScalarImage normalize_thermal(const ThermalFrame& frame, double t_lo, double t_hi) {
  if (!std::isfinite(t_lo) || !std::isfinite(t_hi) || t_lo >= t_hi) throw InputError("thermal bounds need t_lo < t_hi");
  frame.validate();
  ScalarImage out(frame.width, frame.height);
  const double span = t_hi - t_lo;
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    out.values[i] = std::clamp((frame.values[i] - t_lo) / span, 0.0, 1.0);
  }
  return out;
}

ThermalBounds frame_bounds(const ThermalFrame& frame) {
  frame.validate();
  const auto [lo, hi] = std::minmax_element(frame.values.begin(), frame.values.end());
  if (*hi > *lo) return {*lo, *hi};
  return {*lo, *lo + 1.0};
}

void CalibrationTransform::validate() const {
  if (!std::isfinite(rotation_deg) || !std::isfinite(translate_x) || !std::isfinite(translate_y)) {
    throw InputError("calibration values must be finite");
  }
  if (!(scale_x > 0.0) || !(scale_y > 0.0) || !std::isfinite(scale_x) || !std::isfinite(scale_y)) {
    throw InputError("calibration scales must be positive");
  }
  if (target_width <= 0 || target_height <= 0) throw InputError("calibration target size must be positive");
  if (crop.w <= 0 || crop.h <= 0) throw InputError("degenerate calibration crop");
  if (crop.x < 0 || crop.y < 0 || crop.x + crop.w > target_width || crop.y + crop.h > target_height) {
    throw InputError("calibration crop lies outside the target frame");
  }
  if (source_width < 0 || source_height < 0) throw InputError("calibration source size must be >= 0");
}

CalibrationTransform CalibrationTransform::identity(int width, int height) {
  CalibrationTransform t;
  t.crop = {0, 0, width, height};
  t.target_width = width;
  t.target_height = height;
  t.source_width = width;
  t.source_height = height;
  return t;
}

CalibrationTransform CalibrationTransform::with_source(int width, int height) const {
  CalibrationTransform t = *this;
  t.source_width = width;
  t.source_height = height;
  return t;
}

Point2 map_point(const CalibrationTransform& transform, Point2 source_px) {
  if (transform.source_width <= 0 || transform.source_height <= 0) {
    throw InputError("map_point needs the calibration source size");
  }
  return apply(forward_affine(transform, transform.source_width, transform.source_height), source_px);
}

Point2 unmap_point(const CalibrationTransform& transform, Point2 target_px) {
  if (transform.source_width <= 0 || transform.source_height <= 0) {
    throw InputError("unmap_point needs the calibration source size");
  }
  return apply(inverted(forward_affine(transform, transform.source_width, transform.source_height)), target_px);
}

CalibrationTransform invert(const CalibrationTransform& transform) {
  transform.validate();
  if (transform.source_width <= 0 || transform.source_height <= 0) {
    throw InputError("invert needs the calibration source size");
  }
  CalibrationTransform inv;
  inv.sensor_id = transform.sensor_id;
  inv.rotation_deg = transform.rotation_deg == 0.0 ? 0.0 : -transform.rotation_deg;
  inv.scale_x = 1.0 / transform.scale_x;
  inv.scale_y = 1.0 / transform.scale_y;
  inv.scale_first = !transform.scale_first;
  // p = c_s + L^-1 (q - c_t) - L^-1 t
  const Affine back = inverted(linear_part(transform));
  inv.translate_x = -(back.m00 * transform.translate_x + back.m01 * transform.translate_y);
  inv.translate_y = -(back.m10 * transform.translate_x + back.m11 * transform.translate_y);
  if (inv.translate_x == 0.0) inv.translate_x = 0.0;  // normalize -0
  if (inv.translate_y == 0.0) inv.translate_y = 0.0;
  inv.target_width = transform.source_width;
  inv.target_height = transform.source_height;
  inv.crop = {0, 0, transform.source_width, transform.source_height};
  inv.source_width = transform.target_width;
  inv.source_height = transform.target_height;
  return inv;
}

Calibrated<RgbImage> calibrate(const RgbImage& sensor_image, const CalibrationTransform& transform,
                               const Bitmap* source_validity) {
  transform.validate();
  sensor_image.validate();
  if (sensor_image.width <= 0 || sensor_image.height <= 0) throw InputError("empty sensor image");
  check_source_validity(source_validity, sensor_image.width, sensor_image.height);
  Calibrated<RgbImage> out{RgbImage(transform.target_width, transform.target_height),
                           Bitmap(transform.target_width, transform.target_height)};
  resample<3>(sensor_image.pixels.data(), sensor_image.width, sensor_image.height, transform, source_validity,
              out.image.pixels.data(), out.validity);
  return out;
}

Calibrated<ScalarImage> calibrate(const ScalarImage& sensor_field, const CalibrationTransform& transform,
                                  const Bitmap* source_validity) {
  transform.validate();
  if (sensor_field.width <= 0 || sensor_field.height <= 0 ||
      sensor_field.values.size() != static_cast<std::size_t>(sensor_field.width) * sensor_field.height) {
    throw InputError("invalid sensor field");
  }
  check_source_validity(source_validity, sensor_field.width, sensor_field.height);
  Calibrated<ScalarImage> out{ScalarImage(transform.target_width, transform.target_height),
                              Bitmap(transform.target_width, transform.target_height)};
  resample<1>(sensor_field.values.data(), sensor_field.width, sensor_field.height, transform, source_validity,
              out.image.values.data(), out.validity);
  return out;
}

CalibrationTransform calibration_from_json_text(std::string_view text) {
  nlohmann::json j;
  const std::string owned(text);
  try {
    j = nlohmann::json::parse(owned);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("calibration JSON: ") + e.what(), line_of_offset(owned, e.byte > 0 ? e.byte - 1 : 0));
  }
  try {
    CalibrationTransform t;
    t.sensor_id = j.value("sensor_id", std::string{});
    t.rotation_deg = j.value("rotation_deg", 0.0);
    const auto scale = json_numbers(j, "scale", 2);
    t.scale_x = scale[0];
    t.scale_y = scale[1];
    const auto translate = json_numbers(j, "translate_px", 2);
    t.translate_x = translate[0];
    t.translate_y = translate[1];
    const auto target = json_numbers(j, "target", 2);
    t.target_width = static_cast<int>(target[0]);
    t.target_height = static_cast<int>(target[1]);
    if (j.contains("crop")) {
      const auto crop = json_numbers(j, "crop", 4);
      t.crop = {static_cast<int>(crop[0]), static_cast<int>(crop[1]), static_cast<int>(crop[2]),
                static_cast<int>(crop[3])};
    } else {
      t.crop = {0, 0, t.target_width, t.target_height};
    }
    if (j.contains("source")) {
      const auto source = json_numbers(j, "source", 2);
      t.source_width = static_cast<int>(source[0]);
      t.source_height = static_cast<int>(source[1]);
    }
    t.scale_first = j.value("scale_first", false);
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("calibration JSON: ") + e.what());
  }
}

std::string calibration_to_json_text(const CalibrationTransform& t) {
  nlohmann::json j;
  j["sensor_id"] = t.sensor_id;
  j["rotation_deg"] = t.rotation_deg;
  j["scale"] = {t.scale_x, t.scale_y};
  j["translate_px"] = {t.translate_x, t.translate_y};
  j["crop"] = {t.crop.x, t.crop.y, t.crop.w, t.crop.h};
  j["target"] = {t.target_width, t.target_height};
  if (t.source_width > 0 && t.source_height > 0) j["source"] = {t.source_width, t.source_height};
  if (t.scale_first) j["scale_first"] = true;
  return j.dump(2);
}

CalibrationTransform load_calibration(const std::filesystem::path& path) {
  try {
    return calibration_from_json_text(read_file_text(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::data) throw;
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_calibration(const CalibrationTransform& transform, const std::filesystem::path& path) {
  write_file_text(path, calibration_to_json_text(transform));
}

}  // namespace omnifuse

namespace omnifuse {

CalibrationRoundTrip check_round_trip(const CalibrationTransform& transform) {
  transform.validate();
  if (transform.source_width <= 0 || transform.source_height <= 0) {
    throw InputError("round-trip check needs the source size");
  }
  const int sw = transform.source_width, sh = transform.source_height;
  CalibrationRoundTrip out;
  const auto inverse = invert(transform);
  for (int j = 0; j <= 16; ++j) {
    for (int i = 0; i <= 16; ++i) {
      const Point2 p{sw * i / 16.0, sh * j / 16.0};
      const Point2 q = map_point(inverse, map_point(transform, p));
      out.max_point_error_px = std::max(out.max_point_error_px, std::hypot(q.x - p.x, q.y - p.y));
    }
  }
  RgbImage gradient(sw, sh);
  for (int y = 0; y < sh; ++y) {
    for (int x = 0; x < sw; ++x) {
      auto* p = gradient.at(x, y);
      p[0] = static_cast<std::uint8_t>(std::lround(40.0 + 170.0 * x / std::max(1, sw - 1)));
      p[1] = static_cast<std::uint8_t>(std::lround(30.0 + 190.0 * y / std::max(1, sh - 1)));
      p[2] = 128;
    }
  }
  const auto there = calibrate(gradient, transform);
  out.coverage = static_cast<double>(there.validity.count()) /
                 (static_cast<double>(transform.target_width) * transform.target_height);
  const auto back = calibrate(there.image, inverse, &there.validity);
  for (int y = 0; y < sh; ++y) {
    for (int x = 0; x < sw; ++x) {
      if (!back.validity.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        out.max_pixel_error = std::max(out.max_pixel_error, std::abs(back.image.at(x, y)[c] - gradient.at(x, y)[c]));
      }
    }
  }
  return out;
}

}  // namespace omnifuse
