#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "primadnn/audio.hpp"

namespace primadnn {

struct FrontendConfig {
  std::vector<int> window_lengths{2048, 1024, 512};
  int fft_length = 2048;
  double hop_seconds = 0.010;
  int n_mels = 160;
  double fmin = 0.0;
  double fmax = 22050.0;
  double log_floor = 1e-10;

  int hop_samples(int sample_rate) const;
  /// Throws ConfigError on an inconsistent configuration.
  void validate(int sample_rate) const;
};

/// bins x frames, bins = fft_length / 2 + 1.
using Spectrogram = Eigen::MatrixXd;

/// Centered STFT magnitudes with a periodic Hann window of `window_length`
/// samples, zero-padded symmetrically to `cfg.fft_length`. Frame t is
/// centered on sample t * hop; the signal is reflect-padded at both ends.
/// The clip yields ceil(len / hop) frames.
Spectrogram stft(const AudioClip& clip, int window_length, const FrontendConfig& cfg);

struct MelFilterbank {
  Eigen::MatrixXd weights;  // n_mels x (fft_length / 2 + 1)
  std::vector<double> band_center_hz;
  // Nonzero column range [first, last) of each row.
  std::vector<std::pair<int, int>> support;

  int n_mels() const { return static_cast<int>(weights.rows()); }
  int n_bins() const { return static_cast<int>(weights.cols()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with peaks equally spaced on the HTK mel scale.
MelFilterbank build_mel_filterbank(const FrontendConfig& cfg, int sample_rate);

/// ln(fb * mag^2 + log_floor), n_mels x frames.
Eigen::MatrixXd mel_spectrogram(const Spectrogram& mag, const MelFilterbank& fb,
                                const FrontendConfig& cfg);

inline constexpr const char* kPitchgramChannel = "pitchgram";

/// channels x n_mels x n_frames, row-major, channel-major.
struct FeatureStack {
  int channels = 0;
  int n_mels = 0;
  int n_frames = 0;
  std::vector<std::string> channel_names;
  std::vector<float> data;

  FeatureStack() = default;
  FeatureStack(std::vector<std::string> names, int mels, int frames);

  float& at(int c, int m, int t) {
    return data[(static_cast<std::size_t>(c) * n_mels + m) * n_frames + t];
  }
  float at(int c, int m, int t) const {
    return data[(static_cast<std::size_t>(c) * n_mels + m) * n_frames + t];
  }
  std::span<float> channel(int c) {
    return {data.data() + static_cast<std::size_t>(c) * n_mels * n_frames,
            static_cast<std::size_t>(n_mels) * n_frames};
  }
  std::span<const float> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * n_mels * n_frames,
            static_cast<std::size_t>(n_mels) * n_frames};
  }
  int channel_index(const std::string& name) const;
  bool has_pitchgram() const { return channel_index(kPitchgramChannel) >= 0; }
};

/// Channel name of the mel channel computed with `window_length`.
std::string mel_channel_name(int window_length);

/// One log-mel channel per configured window, in configuration order.
/// `n_frames` overrides the frame count (zero means ceil(len / hop)); audio
/// is zero-padded or truncated to exactly that many hops.
FeatureStack multi_res_stack(const AudioClip& clip, const FrontendConfig& cfg, int n_frames = 0);

/// Copies the named channels, in the given order, into a new stack.
FeatureStack select_channels(const FeatureStack& stack, std::span<const std::string> names);

/// Appends one channel (n_mels x n_frames, row-major) to the stack.
void append_channel(FeatureStack& stack, const std::string& name, std::span<const float> values);

struct ChannelStats {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Per-channel global moments over a set of stacks. The pitchgram channel
/// gets (0, 1) so that standardization leaves it untouched.
ChannelStats compute_channel_stats(std::span<const FeatureStack> stacks);
ChannelStats compute_channel_stats(std::span<const FeatureStack* const> stacks);

/// (x - mean_c) / std_c for every mel channel; pitchgram passes through.
/// Stats are matched to channels by name.
FeatureStack standardize(const FeatureStack& stack, const ChannelStats& stats);
void standardize_in_place(FeatureStack& stack, const ChannelStats& stats);

}  // namespace primadnn
