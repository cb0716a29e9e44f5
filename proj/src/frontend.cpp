#include "primadnn/frontend.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace primadnn {

namespace {

// The FFTW planner is not reentrant; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t reflect_index(long long i, long long n) {
  if (n == 1) return 0;
  const long long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= n) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

int FrontendConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_seconds * sample_rate));
}

void FrontendConfig::validate(int sample_rate) const {
  if (window_lengths.empty()) throw ConfigError("no STFT window lengths configured");
  for (std::size_t i = 0; i < window_lengths.size(); ++i) {
    if (window_lengths[i] <= 0) throw ConfigError("window length must be positive");
    if (window_lengths[i] > fft_length) {
      throw ConfigError("window length " + std::to_string(window_lengths[i]) +
                        " exceeds fft length " + std::to_string(fft_length));
    }
    if (i > 0 && window_lengths[i] >= window_lengths[i - 1]) {
      throw ConfigError("window lengths must be strictly decreasing");
    }
  }
  if (n_mels < 1) throw ConfigError("n_mels must be positive");
  if (hop_samples(sample_rate) < 1) throw ConfigError("hop must be at least one sample");
  if (!(fmin >= 0.0 && fmin < fmax)) throw ConfigError("need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) throw ConfigError("fmax above Nyquist");
  if (!(log_floor > 0.0)) throw ConfigError("log floor must be positive");
}

Spectrogram stft(const AudioClip& clip, int window_length, const FrontendConfig& cfg) {
  validate_clip(clip);
  if (window_length > cfg.fft_length) {
    throw ConfigError("window length " + std::to_string(window_length) + " exceeds fft length");
  }
  if (std::find(cfg.window_lengths.begin(), cfg.window_lengths.end(), window_length) ==
      cfg.window_lengths.end()) {
    throw ConfigError("window length " + std::to_string(window_length) + " not configured");
  }

  const int n_fft = cfg.fft_length;
  const int hop = cfg.hop_samples(clip.sample_rate);
  const auto n = static_cast<long long>(clip.samples.size());
  const int n_frames = static_cast<int>((n + hop - 1) / hop);
  const int n_bins = n_fft / 2 + 1;

  // Periodic Hann centered in the FFT buffer.
  std::vector<double> window(static_cast<std::size_t>(n_fft), 0.0);
  const int offset = (n_fft - window_length) / 2;
  for (int i = 0; i < window_length; ++i) {
    window[static_cast<std::size_t>(offset + i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / window_length);
  }

  double* in = fftw_alloc_real(static_cast<std::size_t>(n_fft));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n_fft, in, out, FFTW_ESTIMATE);
  }

  Spectrogram mag(n_bins, n_frames);
  const long long half = n_fft / 2;
  for (int t = 0; t < n_frames; ++t) {
    const long long start = static_cast<long long>(t) * hop - half;
    for (int i = 0; i < n_fft; ++i) {
      const double w = window[static_cast<std::size_t>(i)];
      in[i] = w == 0.0 ? 0.0 : w * clip.samples[reflect_index(start + i, n)];
    }
    fftw_execute(plan);
    for (int k = 0; k < n_bins; ++k) mag(k, t) = std::hypot(out[k][0], out[k][1]);
  }

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return mag;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank build_mel_filterbank(const FrontendConfig& cfg, int sample_rate) {
  if (cfg.fmax > sample_rate / 2.0) throw ConfigError("fmax above Nyquist");
  if (!(cfg.fmin >= 0.0 && cfg.fmin < cfg.fmax)) throw ConfigError("need 0 <= fmin < fmax");
  if (cfg.n_mels < 1) throw ConfigError("n_mels must be positive");

  const int n_bins = cfg.fft_length / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  }

  MelFilterbank fb;
  fb.weights = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  fb.band_center_hz.resize(static_cast<std::size_t>(cfg.n_mels));
  fb.support.resize(static_cast<std::size_t>(cfg.n_mels));
  const double bin_hz = static_cast<double>(sample_rate) / cfg.fft_length;
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    fb.band_center_hz[m] = center;
    int first = n_bins, last = 0;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      const double w = std::max(0.0, std::min((f - lo) / (center - lo), (hi - f) / (hi - center)));
      if (w > 0.0) {
        fb.weights(m, k) = w;
        first = std::min(first, k);
        last = k + 1;
      }
    }
    if (last <= first) {
      throw ConfigError("mel filter " + std::to_string(m) +
                        " covers no FFT bin; lower n_mels or raise fft_length");
    }
    fb.support[m] = {first, last};
  }
  return fb;
}

Eigen::MatrixXd mel_spectrogram(const Spectrogram& mag, const MelFilterbank& fb,
                                const FrontendConfig& cfg) {
  if (mag.rows() != fb.n_bins()) {
    throw std::invalid_argument("spectrogram has " + std::to_string(mag.rows()) +
                                " bins, filterbank expects " + std::to_string(fb.n_bins()));
  }
  const Eigen::MatrixXd power = mag.array().square().matrix();
  Eigen::MatrixXd out(fb.n_mels(), mag.cols());
  for (int m = 0; m < fb.n_mels(); ++m) {
    const auto [first, last] = fb.support[m];
    const auto w = fb.weights.row(m).segment(first, last - first);
    out.row(m) = w * power.middleRows(first, last - first);
  }
  return (out.array() + cfg.log_floor).log().matrix();
}

FeatureStack::FeatureStack(std::vector<std::string> names, int mels, int frames)
    : channels(static_cast<int>(names.size())),
      n_mels(mels),
      n_frames(frames),
      channel_names(std::move(names)),
      data(static_cast<std::size_t>(channels) * mels * frames, 0.0f) {}

int FeatureStack::channel_index(const std::string& name) const {
  for (int c = 0; c < channels; ++c) {
    if (channel_names[static_cast<std::size_t>(c)] == name) return c;
  }
  return -1;
}

std::string mel_channel_name(int window_length) { return "mel" + std::to_string(window_length); }

FeatureStack multi_res_stack(const AudioClip& clip, const FrontendConfig& cfg, int n_frames) {
  validate_clip(clip);
  cfg.validate(clip.sample_rate);
  const int hop = cfg.hop_samples(clip.sample_rate);

  const AudioClip* source = &clip;
  AudioClip resized;
  if (n_frames > 0 && n_frames != clip.duration_frames()) {
    resized.sample_rate = clip.sample_rate;
    resized.samples = clip.samples;
    resized.samples.resize(static_cast<std::size_t>(n_frames) * hop, 0.0);
    source = &resized;
  }
  const int frames = source->duration_frames();

  std::vector<std::string> names;
  for (int w : cfg.window_lengths) names.push_back(mel_channel_name(w));
  FeatureStack stack(std::move(names), cfg.n_mels, frames);

  const MelFilterbank fb = build_mel_filterbank(cfg, clip.sample_rate);
  for (std::size_t c = 0; c < cfg.window_lengths.size(); ++c) {
    const Eigen::MatrixXd mel = mel_spectrogram(stft(*source, cfg.window_lengths[c], cfg), fb, cfg);
    auto dst = stack.channel(static_cast<int>(c));
    for (int m = 0; m < cfg.n_mels; ++m) {
      for (int t = 0; t < frames; ++t) {
        dst[static_cast<std::size_t>(m) * frames + t] = static_cast<float>(mel(m, t));
      }
    }
  }
  return stack;
}

FeatureStack select_channels(const FeatureStack& stack, std::span<const std::string> names) {
  FeatureStack out(std::vector<std::string>(names.begin(), names.end()), stack.n_mels,
                   stack.n_frames);
  for (int c = 0; c < out.channels; ++c) {
    const int src = stack.channel_index(out.channel_names[static_cast<std::size_t>(c)]);
    if (src < 0) {
      throw std::invalid_argument("feature stack has no channel '" +
                                  out.channel_names[static_cast<std::size_t>(c)] + "'");
    }
    std::ranges::copy(stack.channel(src), out.channel(c).begin());
  }
  return out;
}

void append_channel(FeatureStack& stack, const std::string& name, std::span<const float> values) {
  if (values.size() != static_cast<std::size_t>(stack.n_mels) * stack.n_frames) {
    throw std::invalid_argument("appended channel has the wrong size");
  }
  stack.data.insert(stack.data.end(), values.begin(), values.end());
  stack.channel_names.push_back(name);
  ++stack.channels;
}

ChannelStats compute_channel_stats(std::span<const FeatureStack* const> stacks) {
  if (stacks.empty()) throw std::invalid_argument("no feature stacks to compute statistics from");
  ChannelStats stats;
  stats.names = stacks.front()->channel_names;
  const std::size_t nc = stats.names.size();
  stats.mean.assign(nc, 0.0);
  stats.std.assign(nc, 1.0);
  for (std::size_t c = 0; c < nc; ++c) {
    if (stats.names[c] == kPitchgramChannel) continue;
    double sum = 0.0, count = 0.0;
    for (const FeatureStack* s : stacks) {
      const int ci = s->channel_index(stats.names[c]);
      if (ci < 0) throw std::invalid_argument("feature stacks disagree on channel '" + stats.names[c] + "'");
      for (float v : s->channel(ci)) sum += v;
      count += static_cast<double>(s->n_mels) * s->n_frames;
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const FeatureStack* s : stacks) {
      for (float v : s->channel(s->channel_index(stats.names[c]))) sq += (v - mean) * (v - mean);
    }
    stats.mean[c] = mean;
    stats.std[c] = std::sqrt(sq / count);
    if (!(stats.std[c] > 0.0)) stats.std[c] = 1.0;
  }
  return stats;
}

ChannelStats compute_channel_stats(std::span<const FeatureStack> stacks) {
  std::vector<const FeatureStack*> ptrs;
  for (const auto& s : stacks) ptrs.push_back(&s);
  return compute_channel_stats(std::span<const FeatureStack* const>(ptrs));
}

void standardize_in_place(FeatureStack& stack, const ChannelStats& stats) {
  for (int c = 0; c < stack.channels; ++c) {
    const std::string& name = stack.channel_names[static_cast<std::size_t>(c)];
    if (name == kPitchgramChannel) continue;
    const auto it = std::find(stats.names.begin(), stats.names.end(), name);
    if (it == stats.names.end()) {
      throw std::invalid_argument("no standardization statistics for channel '" + name + "'");
    }
    const auto i = static_cast<std::size_t>(it - stats.names.begin());
    const double mean = stats.mean[i], sd = stats.std[i];
    if (!std::isfinite(mean) || !std::isfinite(sd)) {
      throw std::invalid_argument("non-finite standardization statistics");
    }
    if (!(sd > 0.0)) throw std::invalid_argument("standard deviation must be positive");
    for (float& v : stack.channel(c)) v = static_cast<float>((v - mean) / sd);
  }
}

FeatureStack standardize(const FeatureStack& stack, const ChannelStats& stats) {
  FeatureStack out = stack;
  standardize_in_place(out, stats);
  return out;
}

}  // namespace primadnn
