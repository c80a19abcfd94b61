#include "omnifuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"
#include "omnifuse/image_io.hpp"

namespace omnifuse {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
}

void check_same_size(const RgbImage& rgb, int w, int h, const char* what) {
  if (rgb.width != w || rgb.height != h) {
    throw InputError(std::string(what) + " is " + std::to_string(w) + "x" + std::to_string(h) + ", RGB frame is " +
                     std::to_string(rgb.width) + "x" + std::to_string(rgb.height));
  }
}

void blend_into(RgbImage& out, const RgbImage& sensor, const Bitmap& validity, const Bitmap& mask, double alpha) {
  const double beta = 1.0 - alpha;
  const std::size_t n = out.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.bits[i] == 0 || validity.bits[i] == 0) continue;
    std::uint8_t* px = out.pixels.data() + 3 * i;
    const std::uint8_t* s = sensor.pixels.data() + 3 * i;
    for (int c = 0; c < 3; ++c) {
      px[c] = static_cast<std::uint8_t>(std::floor(alpha * s[c] + beta * px[c] + 0.5));
    }
  }
}

void check_layer(const RgbImage& rgb, const RgbImage& sensor, const Bitmap& validity, const SegMask& mask,
                 double alpha) {
  rgb.validate();
  sensor.validate();
  check_alpha(alpha);
  check_same_size(rgb, sensor.width, sensor.height, "calibrated sensor image");
  check_same_size(rgb, validity.width, validity.height, "validity matrix");
  check_same_size(rgb, mask.width(), mask.height(), "mask");
  if (validity.bits.size() != rgb.pixel_count() || mask.bits.bits.size() != rgb.pixel_count()) {
    throw InputError("mask/validity buffer length does not match its dimensions");
  }
}

}  // namespace

double SegMask::coverage() const noexcept {
  return bits.bits.empty() ? 0.0 : static_cast<double>(bits.count()) / static_cast<double>(bits.bits.size());
}

void SegMask::validate(int rgb_width, int rgb_height) const {
  if (bits.width != rgb_width || bits.height != rgb_height) {
    throw ProtocolError("mask is " + std::to_string(bits.width) + "x" + std::to_string(bits.height) +
                        ", RGB frame is " + std::to_string(rgb_width) + "x" + std::to_string(rgb_height));
  }
  if (bits.bits.size() != static_cast<std::size_t>(rgb_width) * static_cast<std::size_t>(rgb_height)) {
    throw ProtocolError("mask buffer length does not match its dimensions");
  }
  if (std::any_of(bits.bits.begin(), bits.bits.end(), [](std::uint8_t b) { return b > 1; })) {
    throw ProtocolError("mask entries must be 0 or 1");
  }
}

SensorMaskedImage blend(const RgbImage& rgb, const RgbImage& sensor_calibrated, const Bitmap& validity,
                        const SegMask& mask, double alpha) {
  check_layer(rgb, sensor_calibrated, validity, mask, alpha);
  SensorMaskedImage out;
  out.image = rgb;
  out.alpha = alpha;
  out.mask_generation = mask.generation;
  out.mask_prompt = mask.prompt_text;
  blend_into(out.image, sensor_calibrated, validity, mask.bits, alpha);
  return out;
}

RgbImage composite(const RgbImage& rgb, std::span<const SensorLayer> layers) {
  RgbImage out = rgb;
  for (const auto& layer : layers) {
    if (layer.sensor_calibrated == nullptr || layer.validity == nullptr || layer.mask == nullptr) {
      throw InputError("composite layer is missing an input");
    }
    check_layer(rgb, *layer.sensor_calibrated, *layer.validity, *layer.mask, layer.alpha);
    blend_into(out, *layer.sensor_calibrated, *layer.validity, layer.mask->bits, layer.alpha);
  }
  return out;
}

double RgbStatisticsReport::min_intersection() const noexcept {
  return *std::min_element(histogram_intersection.begin(), histogram_intersection.end());
}

RgbStatisticsReport rgb_statistics_distance(const RgbImage& a, const RgbImage& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height) throw InputError("statistics need equal image sizes");
  RgbStatisticsReport report;
  const std::size_t n = a.pixel_count();
  if (n == 0) {
    report.histogram_intersection = {1.0, 1.0, 1.0};
    return report;
  }
  constexpr int kShift = 2;  // 256 levels -> 64 bins
  for (int c = 0; c < 3; ++c) {
    std::array<std::size_t, kStatisticsBins> ha{}, hb{};
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t va = a.pixels[3 * i + c];
      const std::uint8_t vb = b.pixels[3 * i + c];
      ++ha[va >> kShift];
      ++hb[vb >> kShift];
      sum_a += va;
      sum_b += vb;
    }
    std::size_t common = 0;
    for (int k = 0; k < kStatisticsBins; ++k) common += std::min(ha[k], hb[k]);
    report.histogram_intersection[c] = static_cast<double>(common) / static_cast<double>(n);
    report.mean_delta[c] = std::abs(sum_a - sum_b) / static_cast<double>(n);
  }
  return report;
}

SegMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  Gray8 gray;
  try {
    gray = decode_png_gray8(bytes);
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("mask PNG: ") + e.what());
  }
  SegMask mask;
  mask.bits = Bitmap(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.values.size(); ++i) {
    const std::uint8_t v = gray.values[i];
    if (v != 0 && v != 255) throw ProtocolError("mask PNG holds value " + std::to_string(v) + "; only 0 and 255 allowed");
    mask.bits.bits[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

SegMask load_mask_png(const std::filesystem::path& path) {
  try {
    auto mask = decode_mask_png(read_file_bytes(path));
    mask.source = MaskSource::file;
    return mask;
  } catch (const ProtocolError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_mask_png(const Bitmap& bits) {
  Gray8 gray{bits.width, bits.height, std::vector<std::uint8_t>(bits.bits.size())};
  for (std::size_t i = 0; i < bits.bits.size(); ++i) gray.values[i] = bits.bits[i] ? 255 : 0;
  return encode_png(gray);
}

void save_mask_png(const Bitmap& bits, const std::filesystem::path& path) {
  write_file_bytes(path, encode_mask_png(bits));
}

}  // namespace omnifuse
