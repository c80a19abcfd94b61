#pragma once

// Multichannel PCM handling for microphone arrays: dominant-bin wavelength
// selection and reduction of a block to one complex sample per channel.

#include <filesystem>
#include <vector>

#include "omnifuse/sensor_model.hpp"

namespace omnifuse {

inline constexpr double kSpeedOfSound = 343.0;

struct AudioBlock {
  double sample_rate = 0.0;
  std::vector<std::vector<double>> channels;  // channels[c][n]
  TimestampNs timestamp = 0;

  std::size_t frames() const noexcept { return channels.empty() ? 0 : channels.front().size(); }
  /// Throws InputError on no channels, ragged channels or non-finite samples.
  void validate() const;
};

struct DominantBin {
  std::size_t bin = 0;
  double frequency_hz = 0.0;
  double wavelength_m = 0.0;
  double bin_width_hz = 0.0;
};

/// Bin (DC excluded) with the largest magnitude summed over channels.
/// Requires >= 64 samples per channel; silence throws InputError
/// "no dominant frequency".
DominantBin find_dominant_bin(const AudioBlock& audio, double speed_of_sound = kSpeedOfSound);

/// speed_of_sound / f* for the dominant bin.
double dominant_bin_wavelength(const AudioBlock& audio, double speed_of_sound = kSpeedOfSound);

/// One complex DFT coefficient per channel at `bin`.
ArraySnapshot audio_to_snapshot(const AudioBlock& audio, std::size_t bin);

/// 16-bit PCM or 32-bit float WAV, interleaved channels, samples scaled to [-1, 1].
AudioBlock load_wav(const std::filesystem::path& path);
/// Writes 32-bit float WAV.
void save_wav(const AudioBlock& audio, const std::filesystem::path& path);

}  // namespace omnifuse
