#include "omnifuse/image_io.hpp"

#include <png.h>
#include <zlib.h>

#include <charconv>
#include <csetjmp>
#include <cstring>
#include <sstream>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"

namespace omnifuse {

namespace {

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + length > reader->bytes.size()) png_error(png, "PNG data truncated");
  std::memcpy(out, reader->bytes.data() + reader->offset, length);
  reader->offset += length;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

[[noreturn]] void on_png_error(png_structp png, png_const_charp message) {
  auto* buffer = static_cast<char*>(png_get_error_ptr(png));
  if (buffer != nullptr) {
    std::strncpy(buffer, message, 255);
    buffer[255] = '\0';
  }
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode_rows(int width, int height, int color_type, int bit_depth, int compression,
                                      const std::uint8_t* data, std::size_t row_bytes) {
  char message[256] = "libpng error";
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, message, on_png_error, on_png_warning);
  if (png == nullptr) throw Error(ErrorKind::data, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(std::string("PNG encode: ") + message);
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_compression_level(png, compression);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_compression_strategy(png, Z_RLE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // host-order uint16 -> network order
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

enum class DecodeTarget { rgb8, gray8_strict, gray16_strict };

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

Decoded decode(std::span<const std::uint8_t> bytes, DecodeTarget target) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ParseError("not a PNG stream");
  char message[256] = "libpng error";
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, message, on_png_error, on_png_warning);
  if (png == nullptr) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  MemoryReader reader{bytes, 0};
  Decoded result;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(std::string("PNG decode: ") + message);
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  std::size_t channels = 0;
  std::size_t bytes_per_sample = 1;
  switch (target) {
    case DecodeTarget::rgb8:
      if (bit_depth == 16) png_set_strip_16(png);
      if (bit_depth < 8) png_set_packing(png);
      if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
      if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
      if ((color_type & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_strip_alpha(png);
      }
      channels = 3;
      break;
    case DecodeTarget::gray8_strict:
      if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
        png_error(png, "expected 8-bit grayscale PNG");
      }
      channels = 1;
      break;
    case DecodeTarget::gray16_strict:
      if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
        png_error(png, "expected 16-bit grayscale PNG");
      }
      png_set_swap(png);
      channels = 1;
      bytes_per_sample = 2;
      break;
  }
  png_read_update_info(png, info);
  result.width = static_cast<int>(png_get_image_width(png, info));
  result.height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t row_bytes = static_cast<std::size_t>(result.width) * channels * bytes_per_sample;
  if (png_get_rowbytes(png, info) != row_bytes) {
    png_error(png, "unexpected PNG row layout");
  }
  result.data.resize(row_bytes * static_cast<std::size_t>(result.height));
  rows.resize(static_cast<std::size_t>(result.height));
  for (int y = 0; y < result.height; ++y) rows[static_cast<std::size_t>(y)] = result.data.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image, int compression) {
  image.validate();
  return encode_rows(image.width, image.height, PNG_COLOR_TYPE_RGB, 8, compression, image.pixels.data(),
                     static_cast<std::size_t>(image.width) * 3);
}

std::vector<std::uint8_t> encode_png(const Gray8& image, int compression) {
  return encode_rows(image.width, image.height, PNG_COLOR_TYPE_GRAY, 8, compression, image.values.data(),
                     static_cast<std::size_t>(image.width));
}

std::vector<std::uint8_t> encode_png(const Gray16& image, int compression) {
  return encode_rows(image.width, image.height, PNG_COLOR_TYPE_GRAY, 16, compression,
                     reinterpret_cast<const std::uint8_t*>(image.values.data()),
                     static_cast<std::size_t>(image.width) * 2);
}

RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) {
  auto d = decode(bytes, DecodeTarget::rgb8);
  RgbImage img;
  img.width = d.width;
  img.height = d.height;
  img.pixels = std::move(d.data);
  return img;
}

Gray8 decode_png_gray8(std::span<const std::uint8_t> bytes) {
  auto d = decode(bytes, DecodeTarget::gray8_strict);
  return {d.width, d.height, std::move(d.data)};
}

Gray16 decode_png_gray16(std::span<const std::uint8_t> bytes) {
  auto d = decode(bytes, DecodeTarget::gray16_strict);
  Gray16 g{d.width, d.height, std::vector<std::uint16_t>(d.data.size() / 2)};
  std::memcpy(g.values.data(), d.data.data(), d.data.size());
  return g;
}

RgbImage load_png_rgb(const std::filesystem::path& path) {
  try {
    return decode_png_rgb(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_png(const RgbImage& image, const std::filesystem::path& path, int compression) {
  write_file_bytes(path, encode_png(image, compression));
}

ThermalFrame load_thermal_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string token;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
    return token;
  };
  if (next_token() != "P5") throw ParseError(path.string() + ": not a binary PGM");
  ThermalFrame frame;
  int maxval = 0;
  try {
    frame.width = std::stoi(next_token());
    frame.height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": bad PGM header");
  }
  ++pos;  // single whitespace before raster
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height);
  if (frame.width <= 0 || frame.height <= 0 || pos + count * bps > bytes.size()) {
    throw ParseError(path.string() + ": PGM raster truncated");
  }
  frame.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    frame.values[i] = bps == 2 ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
  }
  return frame;
}

void save_thermal_pgm(const ThermalFrame& frame, const std::filesystem::path& path) {
  frame.validate();
  std::string header = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : frame.values) {
    const auto q = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0) + 0.5);
    out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  write_file_bytes(path, out);
}

ThermalFrame parse_thermal_csv(const std::string& text) {
  ThermalFrame frame;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    int cols = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      std::string cell = line.substr(start, end - start);
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      if (first == std::string::npos) throw ParseError("empty CSV cell", line_no);
      cell = cell.substr(first, last - first + 1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("bad number '" + cell + "' in CSV", line_no);
      }
      frame.values.push_back(v);
      ++cols;
      start = end + 1;
    }
    if (frame.width == 0) frame.width = cols;
    if (cols != frame.width) throw ParseError("ragged CSV row", line_no);
    ++frame.height;
  }
  if (frame.height == 0) throw ParseError("empty thermal CSV");
  return frame;
}

ThermalFrame load_thermal_csv(const std::filesystem::path& path) {
  try {
    return parse_thermal_csv(read_file_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_thermal_csv(const ThermalFrame& frame, const std::filesystem::path& path) {
  frame.validate();
  std::string out;
  char buf[32];
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), frame.values[static_cast<std::size_t>(y) * frame.width + x]);
      if (x > 0) out.push_back(',');
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  write_file_text(path, out);
}

ThermalFrame load_thermal(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return load_thermal_csv(path);
  if (ext == ".pgm") return load_thermal_pgm(path);
  throw DataError("unsupported thermal frame format: " + path.string());
}

}  // namespace omnifuse
