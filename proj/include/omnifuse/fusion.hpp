#pragma once

// Mask-gated alpha blending of calibrated sensor images onto RGB frames.

#include <array>
#include <filesystem>
#include <span>
#include <string>

#include "omnifuse/raster.hpp"
#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

inline constexpr double kDefaultAlpha = 1.0;

enum class MaskSource { file, service };

/// 0/1 segmentation mask in RGB pixel coordinates.
struct SegMask {
  Bitmap bits;
  std::string prompt_text;
  MaskSource source = MaskSource::file;
  TimestampNs created_at = 0;
  std::uint64_t generation = 0;

  int width() const noexcept { return bits.width; }
  int height() const noexcept { return bits.height; }
  double coverage() const noexcept;
  /// Throws ProtocolError unless every entry is 0 or 1 and the size matches.
  void validate(int rgb_width, int rgb_height) const;
};

struct SensorMaskedImage {
  RgbImage image;
  double alpha = kDefaultAlpha;
  std::string sensor_id;
  std::uint64_t mask_generation = 0;
  std::string mask_prompt;
  TimestampNs frame_timestamp = 0;
};

/// Per pixel and channel:
///   mask = 0                 -> rgb (bit-exact)
///   mask = 1, validity = 0   -> rgb
///   mask = 1, validity = 1   -> floor(alpha*sensor + (1-alpha)*rgb + 0.5)
SensorMaskedImage blend(const RgbImage& rgb, const RgbImage& sensor_calibrated, const Bitmap& validity,
                        const SegMask& mask, double alpha = kDefaultAlpha);

struct SensorLayer {
  const RgbImage* sensor_calibrated = nullptr;
  const Bitmap* validity = nullptr;
  const SegMask* mask = nullptr;
  double alpha = kDefaultAlpha;
};

/// Applies several sensor layers in order onto one image. Not the default
/// pipeline output, which keeps one image per sensor.
RgbImage composite(const RgbImage& rgb, std::span<const SensorLayer> layers);

struct RgbStatisticsReport {
  std::array<double, 3> mean_delta{};              // |mean_a - mean_b| per channel
  std::array<double, 3> histogram_intersection{};  // 64-bin, in [0, 1]
  double min_intersection() const noexcept;
};

inline constexpr int kStatisticsBins = 64;

/// Symmetric in (a, b). Throws InputError on size mismatch.
RgbStatisticsReport rgb_statistics_distance(const RgbImage& a, const RgbImage& b);

/// 8-bit grayscale PNG with values 0 (unmasked) and 255 (masked) only.
SegMask decode_mask_png(std::span<const std::uint8_t> bytes);
SegMask load_mask_png(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask_png(const Bitmap& bits);
void save_mask_png(const Bitmap& bits, const std::filesystem::path& path);

}  // namespace omnifuse
