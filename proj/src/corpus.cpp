#include "primadnn/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "primadnn/annotations.hpp"
#include "primadnn/feature_io.hpp"
#include "primadnn/parallel.hpp"

namespace primadnn {

std::vector<std::string> Dataset::singers() const {
  std::set<std::string> s;
  for (const auto& c : clips) s.insert(c.singer_id);
  return {s.begin(), s.end()};
}

std::vector<std::size_t> Dataset::indices_for(std::span<const std::string> singers) const {
  const std::set<std::string> wanted(singers.begin(), singers.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (wanted.count(clips[i].singer_id)) out.push_back(i);
  return out;
}

FeatureStack extract_clip_features(const AudioClip& clip, const PitchContour& contour,
                                   const FrontendConfig& cfg, int n_frames, double voicing_threshold) {
  FeatureStack stack = multi_res_stack(clip, cfg, n_frames);
  const MelFilterbank fb = build_mel_filterbank(cfg, clip.sample_rate);
  const Pitchgram pg = contour_to_pitchgram(contour, fb, stack.n_frames, voicing_threshold, cfg.hop_seconds);
  std::vector<float> values(pg.data.begin(), pg.data.end());
  append_channel(stack, kPitchgramChannel, values);
  return stack;
}

PitchContour slice_contour(const PitchContour& contour, double start_seconds, double length_seconds) {
  PitchContour out;
  for (const auto& e : contour.entries) {
    const double t = e.time - start_seconds;
    if (t >= -1e-9 && t < length_seconds) out.entries.push_back({std::max(t, 0.0), e.frequency, e.confidence});
  }
  return out;
}

std::string frontend_key(const FrontendConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  for (int w : cfg.window_lengths) s << w << ',';
  s << cfg.fft_length << ',' << cfg.hop_seconds << ',' << cfg.n_mels << ',' << cfg.fmin << ','
    << cfg.fmax << ',' << cfg.log_floor;
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset load_dataset(const CorpusManifest& manifest, const DatasetOptions& options) {
  options.frontend.validate(kSampleRate);
  if (!options.cache_dir.empty()) std::filesystem::create_directories(options.cache_dir);
  const std::string key = frontend_key(options.frontend);
  const int n_frames = static_cast<int>(std::llround(options.clip_seconds / options.frontend.hop_seconds));

  std::vector<std::vector<DatasetClip>> per_entry(manifest.clips.size());
  parallel_for(manifest.clips.size(), options.threads, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.clips[i];
    const auto wav_path = manifest.root / entry.wav;
    if (!std::filesystem::exists(wav_path)) throw InputError("missing audio file: " + wav_path.string());
    const AudioClip audio = read_wav(wav_path);
    const EventList events = load_annotations(manifest.root / entry.annotation_csv);
    PitchContour contour;
    if (!entry.pitch_csv.empty()) {
      contour = load_pitch_csv(manifest.root / entry.pitch_csv);
    } else {
      contour = estimate_pitch_fallback(audio);
    }
    const auto segments = segment_track(audio, events, options.clip_seconds);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      DatasetClip clip;
      clip.id = k == 0 ? entry.id : entry.id + "#" + std::to_string(k);
      clip.singer_id = entry.singer_id;
      clip.events = segments[k].events;
      clip.duration_seconds = segments[k].clip.duration_seconds();
      std::filesystem::path cached;
      if (!options.cache_dir.empty()) {
        std::string stem = clip.id;
        std::replace(stem.begin(), stem.end(), '#', '_');
        cached = options.cache_dir / (stem + "." + key + ".pdnf");
      }
      if (!cached.empty() && std::filesystem::exists(cached)) {
        clip.features = read_feature_file(cached);
      } else {
        const PitchContour local =
            slice_contour(contour, segments[k].start_seconds, options.clip_seconds);
        clip.features = extract_clip_features(segments[k].clip, local, options.frontend, n_frames,
                                              options.voicing_threshold);
        if (!cached.empty()) write_feature_file(cached, clip.features);
      }
      per_entry[i].push_back(std::move(clip));
    }
  });
  Dataset ds;
  for (auto& v : per_entry)
    for (auto& c : v) ds.clips.push_back(std::move(c));
  return ds;
}

}  // namespace primadnn
