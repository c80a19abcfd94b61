#pragma once

#include <cstdint>
#include <vector>

namespace omnifuse {

/// Row-major 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::uint8_t* at(int x, int y) noexcept { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const noexcept {
    return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  /// Throws InputError if the buffer length is not 3*width*height.
  void validate() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Row-major scalar raster.
struct ScalarImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  ScalarImage() = default;
  ScalarImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int x, int y) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Row-major 0/1 matrix.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Bitmap() = default;
  Bitmap(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t& at(int x, int y) noexcept { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const noexcept { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const noexcept;

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

}  // namespace omnifuse
