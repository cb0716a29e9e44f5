#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace primadnn {

inline constexpr int kSampleRate = 44100;
inline constexpr int kHopSamples = 441;  // 10 ms at 44.1 kHz
inline constexpr double kFrameSeconds = 0.010;
inline constexpr int kClipFrames = 1000;  // one 10 s segment

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mono audio at 44.1 kHz with samples nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  /// Number of 10 ms analysis frames, ceil(len / hop).
  int duration_frames() const {
    return static_cast<int>((samples.size() + kHopSamples - 1) / kHopSamples);
  }
};

/// Throws InputError if the rate is not 44.1 kHz, the clip is empty or a
/// sample is not finite.
void validate_clip(const AudioClip& clip);

/// Reads a mono 16- or 24-bit PCM WAV file. Other sample rates, channel
/// counts and encodings are rejected with InputError.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM. Samples are clipped to [-1, 1] and rounded.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace primadnn
