#include "omnifuse/beamformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/image_io.hpp"

namespace omnifuse {

namespace {

void check_axis(double lo, double hi, int steps, const char* axis) {
  const std::string name(axis);
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo >= hi) throw InputError(name + " grid needs min < max");
  if (steps < 2) throw InputError(name + " grid needs at least 2 steps");
  if (lo <= -90.0 || hi >= 90.0) throw InputError(name + " grid bounds must lie within (-90, 90)");
}

double to_db(double magnitude, double floor_db) noexcept {
  if (magnitude <= 0.0) return floor_db;
  return std::max(20.0 * std::log10(magnitude), floor_db);
}

void check_floor(double floor_db) {
  if (!std::isfinite(floor_db)) throw InputError("floor_db must be finite");
}

}  // namespace

void AngleGrid::validate() const {
  check_axis(az_min_deg, az_max_deg, az_steps, "azimuth");
  check_axis(el_min_deg, el_max_deg, el_steps, "elevation");
}

Point2 AngleGrid::to_pixel(double azimuth_deg, double elevation_deg) const noexcept {
  return {(azimuth_deg - az_min_deg) / az_step() + 0.5, (el_max_deg - elevation_deg) / el_step() + 0.5};
}

double Heatmap::max_db() const noexcept {
  return values_db.empty() ? floor_db : *std::max_element(values_db.begin(), values_db.end());
}

GridCell Heatmap::argmax() const noexcept {
  const auto it = std::max_element(values_db.begin(), values_db.end());
  const auto index = static_cast<int>(std::distance(values_db.begin(), it));
  return {index / grid.az_steps, index % grid.az_steps};
}

SteeringTable::SteeringTable(const ArrayGeometry& geometry, const AngleGrid& grid)
    : grid_(grid), elements_(geometry.size()) {
  grid_.validate();
  weight_re_.resize(grid_.cell_count() * elements_);
  weight_im_.resize(grid_.cell_count() * elements_);
  std::size_t i = 0;
  for (int row = 0; row < grid_.el_steps; ++row) {
    const double el = deg_to_rad(grid_.elevation(row));
    for (int col = 0; col < grid_.az_steps; ++col) {
      const double az = deg_to_rad(grid_.azimuth(col));
      for (const auto& p : geometry.elements()) {
        const Complex w = std::polar(1.0, -steering_phase(p, geometry.wavelength(), az, el));
        weight_re_[i] = w.real();
        weight_im_[i] = w.imag();
        ++i;
      }
    }
  }
}

Heatmap SteeringTable::beamform(const ArraySnapshot& snapshot, double floor_db) const {
  check_floor(floor_db);
  if (snapshot.samples.size() != elements_) {
    throw InputError("snapshot has " + std::to_string(snapshot.samples.size()) + " samples, steering table expects " +
                     std::to_string(elements_));
  }
  Heatmap out{grid_, floor_db, std::vector<double>(grid_.cell_count())};
  const std::size_t k_count = elements_;
  std::vector<double> s_re(k_count), s_im(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    s_re[k] = snapshot.samples[k].real();
    s_im[k] = snapshot.samples[k].imag();
    if (!std::isfinite(s_re[k]) || !std::isfinite(s_im[k])) throw InputError("snapshot sample is not finite");
  }
  const double* wr = weight_re_.data();
  const double* wi = weight_im_.data();
  for (std::size_t cell = 0; cell < out.values_db.size(); ++cell) {
    double acc_re = 0.0;
    double acc_im = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      acc_re += s_re[k] * wr[k] - s_im[k] * wi[k];
      acc_im += s_re[k] * wi[k] + s_im[k] * wr[k];
    }
    out.values_db[cell] = to_db(std::hypot(acc_re, acc_im), floor_db);
    wr += k_count;
    wi += k_count;
  }
  return out;
}

Heatmap beamform(const ArraySnapshot& snapshot, const ArrayGeometry& geometry, const AngleGrid& grid,
                 double floor_db) {
  check_floor(floor_db);
  grid.validate();
  snapshot.validate_against(geometry);
  Heatmap out{grid, floor_db, std::vector<double>(grid.cell_count())};
  std::size_t cell = 0;
  for (int row = 0; row < grid.el_steps; ++row) {
    const double el = deg_to_rad(grid.elevation(row));
    for (int col = 0; col < grid.az_steps; ++col) {
      const double az = deg_to_rad(grid.azimuth(col));
      double acc_re = 0.0;
      double acc_im = 0.0;
      for (std::size_t k = 0; k < geometry.size(); ++k) {
        const Complex w = std::polar(1.0, -steering_phase(geometry.elements()[k], geometry.wavelength(), az, el));
        const Complex& s = snapshot.samples[k];
        acc_re += s.real() * w.real() - s.imag() * w.imag();
        acc_im += s.real() * w.imag() + s.imag() * w.real();
      }
      out.values_db[cell++] = to_db(std::hypot(acc_re, acc_im), floor_db);
    }
  }
  return out;
}

ScalarImage normalize(const Heatmap& heatmap, double dynamic_range_db) {
  if (!std::isfinite(dynamic_range_db) || dynamic_range_db <= 0.0) {
    throw InputError("dynamic_range_db must be > 0");
  }
  ScalarImage out(heatmap.grid.az_steps, heatmap.grid.el_steps, 0.0);
  const double peak = heatmap.max_db();
  if (peak <= heatmap.floor_db) return out;
  const double base = peak - dynamic_range_db;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = std::clamp((heatmap.values_db[i] - base) / dynamic_range_db, 0.0, 1.0);
  }
  return out;
}

void save_heatmap_pfm(const Heatmap& heatmap, const std::filesystem::path& path) {
  const int w = heatmap.grid.az_steps;
  const int h = heatmap.grid.el_steps;
  std::string header = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + heatmap.values_db.size() * 4);
  // PFM stores the bottom row first.
  for (int row = h - 1; row >= 0; --row) {
    for (int col = 0; col < w; ++col) {
      const float v = static_cast<float>(heatmap.at(row, col));
      std::uint8_t raw[4];
      std::memcpy(raw, &v, 4);
      if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + 4);
      out.insert(out.end(), raw, raw + 4);
    }
  }
  write_file_bytes(path, out);
}

Heatmap load_heatmap_pfm(const std::filesystem::path& path, const AngleGrid& grid, double floor_db) {
  const auto bytes = read_file_bytes(path);
  std::string text(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 64)));
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return text.substr(start, pos - start);
  };
  if (token() != "Pf") throw ParseError(path.string() + ": not a grayscale PFM");
  int w = 0;
  int h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad PFM header");
  }
  ++pos;
  if (w != grid.az_steps || h != grid.el_steps) throw DataError(path.string() + ": PFM size does not match grid");
  if (bytes.size() != pos + static_cast<std::size_t>(w) * h * 4) throw ParseError(path.string() + ": PFM truncated");
  const bool little = scale < 0.0;
  Heatmap out{grid, floor_db, std::vector<double>(grid.cell_count())};
  std::size_t offset = pos;
  for (int row = h - 1; row >= 0; --row) {
    for (int col = 0; col < w; ++col) {
      std::uint8_t raw[4];
      std::memcpy(raw, bytes.data() + offset, 4);
      offset += 4;
      if (little != (std::endian::native == std::endian::little)) std::reverse(raw, raw + 4);
      float v = 0.0f;
      std::memcpy(&v, raw, 4);
      out.values_db[static_cast<std::size_t>(row) * w + col] = v;
    }
  }
  return out;
}

void save_heatmap_png16(const Heatmap& heatmap, double dynamic_range_db, const std::filesystem::path& path) {
  const auto unit = normalize(heatmap, dynamic_range_db);
  Gray16 img{unit.width, unit.height, std::vector<std::uint16_t>(unit.values.size())};
  for (std::size_t i = 0; i < unit.values.size(); ++i) {
    img.values[i] = static_cast<std::uint16_t>(std::floor(unit.values[i] * 65535.0 + 0.5));
  }
  write_file_bytes(path, encode_png(img));
}

}  // namespace omnifuse
