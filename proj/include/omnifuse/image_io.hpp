#pragma once

// PNG (via libpng), PGM and CSV raster I/O.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "omnifuse/raster.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;
};

struct Gray16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;
};

/// zlib level used for PNG output. Output bytes depend only on the pixels and
/// this level.
inline constexpr int kDefaultPngCompression = 3;

std::vector<std::uint8_t> encode_png(const RgbImage& image, int compression = kDefaultPngCompression);
std::vector<std::uint8_t> encode_png(const Gray8& image, int compression = kDefaultPngCompression);
std::vector<std::uint8_t> encode_png(const Gray16& image, int compression = kDefaultPngCompression);

/// Decodes any 8-bit PNG to RGB (gray is expanded, alpha dropped).
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);
/// Decodes an 8-bit single-channel grayscale PNG; any other layout is a ParseError.
Gray8 decode_png_gray8(std::span<const std::uint8_t> bytes);
Gray16 decode_png_gray16(std::span<const std::uint8_t> bytes);

RgbImage load_png_rgb(const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path,
              int compression = kDefaultPngCompression);

/// Binary 16-bit PGM (P5, maxval > 255, big-endian samples).
ThermalFrame load_thermal_pgm(const std::filesystem::path& path);
void save_thermal_pgm(const ThermalFrame& frame, const std::filesystem::path& path);
/// Comma-separated rows of numbers, one line per image row.
ThermalFrame parse_thermal_csv(const std::string& text);
ThermalFrame load_thermal_csv(const std::filesystem::path& path);
void save_thermal_csv(const ThermalFrame& frame, const std::filesystem::path& path);
/// Dispatches on extension (.csv or .pgm).
ThermalFrame load_thermal(const std::filesystem::path& path);

}  // namespace omnifuse
