#include "omnifuse/audio.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>

#include "omnifuse/error.hpp"
#include "omnifuse/file_util.hpp"

namespace omnifuse {

namespace {

// fftw planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealDft {
 public:
  explicit RealDft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n_);
    out_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), in_, out_, FFTW_ESTIMATE);
  }
  ~RealDft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  void run(const std::vector<double>& samples) {
    std::copy(samples.begin(), samples.end(), in_);
    fftw_execute(plan_);
  }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }
  Complex coefficient(std::size_t k) const noexcept { return {out_[k][0], out_[k][1]}; }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

template <typename T>
T read_le(const std::vector<std::uint8_t>& b, std::size_t offset) {
  if (offset + sizeof(T) > b.size()) throw ParseError("WAV file truncated");
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, b.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

}  // namespace

void AudioBlock::validate() const {
  if (channels.empty()) throw InputError("audio block has no channels");
  if (!std::isfinite(sample_rate) || sample_rate <= 0.0) throw InputError("sample_rate must be > 0");
  for (const auto& c : channels) {
    if (c.size() != channels.front().size()) throw InputError("audio channels have different lengths");
    for (double v : c) {
      if (!std::isfinite(v)) throw InputError("audio sample is not finite");
    }
  }
}

DominantBin find_dominant_bin(const AudioBlock& audio, double speed_of_sound) {
  audio.validate();
  if (!std::isfinite(speed_of_sound) || speed_of_sound <= 0.0) throw InputError("speed_of_sound must be > 0");
  const std::size_t n = audio.frames();
  if (n < 64) throw InputError("dominant bin needs at least 64 samples per channel");
  RealDft dft(n);
  std::vector<double> summed(dft.bins(), 0.0);
  for (const auto& channel : audio.channels) {
    dft.run(channel);
    for (std::size_t k = 1; k < dft.bins(); ++k) summed[k] += std::abs(dft.coefficient(k));
  }
  std::size_t best = 0;
  double best_mag = 0.0;
  for (std::size_t k = 1; k < summed.size(); ++k) {
    if (summed[k] > best_mag) {
      best_mag = summed[k];
      best = k;
    }
  }
  if (best == 0) throw InputError("no dominant frequency");
  DominantBin out;
  out.bin = best;
  out.bin_width_hz = audio.sample_rate / static_cast<double>(n);
  out.frequency_hz = static_cast<double>(best) * out.bin_width_hz;
  out.wavelength_m = speed_of_sound / out.frequency_hz;
  return out;
}

double dominant_bin_wavelength(const AudioBlock& audio, double speed_of_sound) {
  return find_dominant_bin(audio, speed_of_sound).wavelength_m;
}

ArraySnapshot audio_to_snapshot(const AudioBlock& audio, std::size_t bin) {
  audio.validate();
  const std::size_t n = audio.frames();
  if (bin == 0 || bin > n / 2) throw InputError("DFT bin out of range");
  RealDft dft(n);
  ArraySnapshot snap;
  snap.timestamp = audio.timestamp;
  snap.samples.reserve(audio.channels.size());
  for (const auto& channel : audio.channels) {
    dft.run(channel);
    snap.samples.push_back(dft.coefficient(bin));
  }
  return snap;
}

AudioBlock load_wav(const std::filesystem::path& path) {
  const auto b = read_file_bytes(path);
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw ParseError(path.string() + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id(reinterpret_cast<const char*>(b.data() + pos), 4);
    const auto size = read_le<std::uint32_t>(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(b, body);
      channels = read_le<std::uint16_t>(b, body + 2);
      rate = read_le<std::uint32_t>(b, body + 4);
      bits = read_le<std::uint16_t>(b, body + 14);
      if (format == 0xFFFE && size >= 40) format = read_le<std::uint16_t>(b, body + 24);  // extensible
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min<std::size_t>(size, b.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (channels == 0 || rate == 0 || data_offset == 0) throw ParseError(path.string() + ": missing fmt/data chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) throw ParseError(path.string() + ": only 16-bit PCM and 32-bit float WAV are supported");
  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  AudioBlock audio;
  audio.sample_rate = rate;
  audio.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = data_offset + (n * channels + c) * bytes_per_sample;
      audio.channels[c][n] = pcm16 ? read_le<std::int16_t>(b, off) / 32768.0 : read_le<float>(b, off);
    }
  }
  return audio;
}

void save_wav(const AudioBlock& audio, const std::filesystem::path& path) {
  audio.validate();
  const auto channels = static_cast<std::uint16_t>(audio.channels.size());
  const auto frames = static_cast<std::uint32_t>(audio.frames());
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  const std::uint32_t data_size = frames * channels * 4u;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  append_le<std::uint32_t>(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, 3);
  append_le<std::uint16_t>(out, channels);
  append_le<std::uint32_t>(out, rate);
  append_le<std::uint32_t>(out, rate * channels * 4u);
  append_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4));
  append_le<std::uint16_t>(out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  append_le<std::uint32_t>(out, data_size);
  for (std::uint32_t n = 0; n < frames; ++n) {
    for (std::uint16_t c = 0; c < channels; ++c) append_le<float>(out, static_cast<float>(audio.channels[c][n]));
  }
  write_file_bytes(path, out);
}

}  // namespace omnifuse
