#include "omnifuse/raster.hpp"

#include <algorithm>

#include "omnifuse/error.hpp"

namespace omnifuse {

void RgbImage::validate() const {
  if (width < 0 || height < 0 || pixels.size() != 3 * pixel_count()) {
    throw InputError("RGB buffer length does not match 3*width*height");
  }
}

std::size_t Bitmap::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

}  // namespace omnifuse
