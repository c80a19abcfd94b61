#include "omnifuse/sensor_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"

namespace omnifuse {

namespace {

constexpr char kSnapshotMagic[8] = {'O', 'M', 'N', 'I', 'S', 'N', 'A', 'P'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw ParseError("snapshot file truncated");
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

void check_angle(double deg, const char* what) {
  if (!std::isfinite(deg) || deg < -90.0 || deg > 90.0) {
    throw InputError(std::string(what) + " must lie in [-90, 90] degrees, got " + std::to_string(deg));
  }
}

}  // namespace

const char* to_string(SensorKind kind) noexcept {
  switch (kind) {
    case SensorKind::mmwave_radar: return "mmwave_radar";
    case SensorKind::microphone_array: return "microphone_array";
    case SensorKind::thermal: return "thermal";
  }
  return "unknown";
}

SensorKind sensor_kind_from_string(std::string_view name) {
  if (name == "mmwave_radar") return SensorKind::mmwave_radar;
  if (name == "microphone_array") return SensorKind::microphone_array;
  if (name == "thermal") return SensorKind::thermal;
  throw InputError("unknown sensor kind '" + std::string(name) + "'");
}

ArrayGeometry::ArrayGeometry(std::vector<Point2> elements, double wavelength_m, SensorKind kind)
    : elements_(std::move(elements)), wavelength_(wavelength_m), kind_(kind) {
  if (kind_ == SensorKind::thermal) throw GeometryError("thermal sensors have no array geometry");
  if (elements_.size() < 2) throw GeometryError("array needs at least 2 elements");
  if (!std::isfinite(wavelength_) || wavelength_ <= 0.0) throw GeometryError("wavelength must be > 0");
  std::set<std::pair<double, double>> seen;
  for (const auto& p : elements_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("element position is not finite");
    if (!seen.emplace(p.x, p.y).second) throw GeometryError("two elements share identical coordinates");
  }
}

ArrayGeometry ArrayGeometry::with_wavelength(double wavelength_m) const {
  return ArrayGeometry(elements_, wavelength_m, kind_);
}

void ArraySnapshot::validate_against(const ArrayGeometry& geometry) const {
  if (samples.size() != geometry.size()) {
    throw InputError("snapshot has " + std::to_string(samples.size()) + " samples but geometry has " +
                     std::to_string(geometry.size()) + " elements");
  }
  for (const auto& s : samples) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) throw InputError("snapshot sample is not finite");
  }
}

void ThermalFrame::validate() const {
  if (width <= 0 || height <= 0) throw InputError("thermal frame dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InputError("thermal frame value count does not match width*height");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("thermal frame value is not finite");
  }
}

double steering_phase(Point2 element, double wavelength_m, double azimuth_rad, double elevation_rad) noexcept {
  return (2.0 * kPi / wavelength_m) *
         (element.x * std::cos(elevation_rad) * std::sin(azimuth_rad) + element.y * std::sin(elevation_rad));
}

double steering_phase(const ArrayGeometry& geometry, std::size_t element_index, double azimuth_deg,
                      double elevation_deg) {
  if (element_index >= geometry.size()) {
    throw InputError("element index " + std::to_string(element_index) + " out of range");
  }
  check_angle(azimuth_deg, "azimuth");
  check_angle(elevation_deg, "elevation");
  return steering_phase(geometry.elements()[element_index], geometry.wavelength(), deg_to_rad(azimuth_deg),
                        deg_to_rad(elevation_deg));
}

ArrayGeometry circular_array(int num_elements, double radius_m, double wavelength_m, SensorKind kind) {
  if (num_elements < 2) throw InputError("circular array needs at least 2 elements");
  if (!std::isfinite(radius_m) || radius_m <= 0.0) throw InputError("circular array radius must be > 0");
  std::vector<Point2> elements;
  elements.reserve(static_cast<std::size_t>(num_elements));
  for (int k = 0; k < num_elements; ++k) {
    const double angle = 2.0 * kPi * k / num_elements;
    elements.push_back({radius_m * std::cos(angle), radius_m * std::sin(angle)});
  }
  return ArrayGeometry(std::move(elements), wavelength_m, kind);
}

ArraySnapshot simulate_snapshot(const ArrayGeometry& geometry, std::span<const PointSource> sources,
                                double noise_std, std::uint64_t seed) {
  if (!std::isfinite(noise_std) || noise_std < 0.0) throw InputError("noise_std must be finite and >= 0");
  for (const auto& s : sources) {
    if (!std::isfinite(s.amplitude) || !std::isfinite(s.phase_offset_rad) || s.amplitude < 0.0) {
      throw InputError("source amplitude/phase must be finite, amplitude >= 0");
    }
    check_angle(s.azimuth_deg, "source azimuth");
    check_angle(s.elevation_deg, "source elevation");
  }

  ArraySnapshot snap;
  snap.samples.assign(geometry.size(), Complex{0.0, 0.0});
  for (const auto& s : sources) {
    const double az = deg_to_rad(s.azimuth_deg);
    const double el = deg_to_rad(s.elevation_deg);
    for (std::size_t k = 0; k < geometry.size(); ++k) {
      const double phi = steering_phase(geometry.elements()[k], geometry.wavelength(), az, el);
      snap.samples[k] += std::polar(s.amplitude, phi + s.phase_offset_rad);
    }
  }
  if (noise_std > 0.0) {
    GaussianSource gauss(seed);
    const double per_component = noise_std / std::sqrt(2.0);
    for (auto& v : snap.samples) {
      const double re = gauss.next();
      const double im = gauss.next();
      v += Complex{per_component * re, per_component * im};
    }
  }
  return snap;
}

double noise_std_for_snr(double amplitude, double snr_db) {
  return amplitude / std::pow(10.0, snr_db / 20.0);
}

ArrayGeometry geometry_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("geometry JSON: ") + e.what(),
                     line_of_offset(std::string(text), e.byte > 0 ? e.byte - 1 : 0));
  }
  try {
    std::vector<Point2> elements;
    for (const auto& e : j.at("elements")) {
      if (!e.is_array() || e.size() != 2) throw GeometryError("each element must be [x, y]");
      elements.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
    return ArrayGeometry(std::move(elements), j.at("wavelength_m").get<double>(),
                         sensor_kind_from_string(j.at("sensor_kind").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("geometry JSON: ") + e.what());
  } catch (const InputError& e) {
    throw GeometryError(e.what());
  }
}

ArrayGeometry load_geometry(const std::filesystem::path& path) {
  return geometry_from_json_text(read_file_text(path));
}

std::string geometry_to_json_text(const ArrayGeometry& geometry) {
  nlohmann::json j;
  j["sensor_kind"] = to_string(geometry.kind());
  j["wavelength_m"] = geometry.wavelength();
  j["elements"] = nlohmann::json::array();
  for (const auto& p : geometry.elements()) j["elements"].push_back({p.x, p.y});
  return j.dump(2);
}

void save_geometry(const ArrayGeometry& geometry, const std::filesystem::path& path) {
  write_file_text(path, geometry_to_json_text(geometry));
}

std::vector<std::uint8_t> encode_snapshot(const ArraySnapshot& snapshot) {
  std::vector<std::uint8_t> out(std::begin(kSnapshotMagic), std::end(kSnapshotMagic));
  out.reserve(8 + 4 + snapshot.samples.size() * 16 + 8);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.samples.size()));
  for (const auto& s : snapshot.samples) {
    put_le<double>(out, s.real());
    put_le<double>(out, s.imag());
  }
  put_le<std::int64_t>(out, snapshot.timestamp);
  return out;
}

ArraySnapshot decode_snapshot(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSnapshotMagic, 8) != 0) {
    throw ParseError("snapshot file: bad magic");
  }
  std::size_t offset = 8;
  const auto count = get_le<std::uint32_t>(bytes, offset);
  if (bytes.size() != 8 + 4 + static_cast<std::size_t>(count) * 16 + 8) {
    throw ParseError("snapshot file: size does not match element count " + std::to_string(count));
  }
  ArraySnapshot snap;
  snap.samples.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const double re = get_le<double>(bytes, offset);
    const double im = get_le<double>(bytes, offset);
    snap.samples.emplace_back(re, im);
  }
  snap.timestamp = get_le<std::int64_t>(bytes, offset);
  return snap;
}

void save_snapshot(const ArraySnapshot& snapshot, const std::filesystem::path& path) {
  write_file_bytes(path, encode_snapshot(snapshot));
}

ArraySnapshot load_snapshot(const std::filesystem::path& path) {
  auto snap = decode_snapshot(read_file_bytes(path));
  snap.geometry_id = path.stem().string();
  return snap;
}

}  // namespace omnifuse
