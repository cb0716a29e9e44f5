#include "primadnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "primadnn/annotations.hpp"
#include "primadnn/parallel.hpp"

namespace primadnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double midi_to_hz(double midi) { return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0); }
double semitones(double s) { return std::pow(2.0, s / 12.0); }
double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

std::size_t to_samples(double seconds) {
  return static_cast<std::size_t>(std::llround(std::max(seconds, 0.0) * kSampleRate));
}

// Linear attack and release ramps over a note of n samples.
void apply_note_envelope(VoiceControls& c, std::size_t begin, std::size_t end, double gain,
                         double attack_s, double release_s = 0.03) {
  const std::size_t n = end - begin;
  const std::size_t attack = std::min(n / 2, to_samples(attack_s));
  const std::size_t release = std::min(n / 2, to_samples(release_s));
  for (std::size_t i = 0; i < n; ++i) {
    double e = 1.0;
    if (i < attack) e = static_cast<double>(i) / attack;
    if (i + release >= n && release > 0) e = std::min(e, static_cast<double>(n - 1 - i) / release);
    c.amp[begin + i] = gain * e;
  }
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return 0.5 - 0.5 * std::cos(std::numbers::pi * u);
}

}  // namespace

void SynthSpec::validate() const {
  const std::pair<const char*, double> positives[] = {
      {"vibrato_rate_min_hz", vibrato_rate_min_hz}, {"vibrato_rate_max_hz", vibrato_rate_max_hz},
      {"vibrato_depth_semitones", vibrato_depth_semitones}, {"vibrato_min_s", vibrato_min_s},
      {"scoop_min_s", scoop_min_s}, {"scoop_depth_min", scoop_depth_min},
      {"bend_min_s", bend_min_s}, {"bend_depth_min", bend_depth_min},
      {"drop_min_s", drop_min_s}, {"drop_depth_min", drop_depth_min},
      {"hiccup_min_s", hiccup_min_s}, {"hiccup_jump_semitones", hiccup_jump_semitones},
      {"hiccup_gap_s", hiccup_gap_s}, {"falsetto_min_s", falsetto_min_s},
      {"falsetto_shift_semitones", falsetto_shift_semitones},
      {"falsetto_upper_attenuation_db", falsetto_upper_attenuation_db},
      {"breathy_min_s", breathy_min_s}, {"rasp_min_s", rasp_min_s}, {"fry_min_s", fry_min_s},
      {"fry_pulse_rate_hz", fry_pulse_rate_hz}, {"margin_min_s", margin_min_s},
      {"clip_seconds", clip_seconds}};
  for (const auto& [name, v] : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("synth: ") + name + " must be positive");
  }
  const std::pair<double, double> ranges[] = {
      {vibrato_rate_min_hz, vibrato_rate_max_hz}, {vibrato_min_s, vibrato_max_s},
      {scoop_min_s, scoop_max_s}, {scoop_depth_min, scoop_depth_max},
      {bend_min_s, bend_max_s}, {bend_depth_min, bend_depth_max},
      {drop_min_s, drop_max_s}, {drop_depth_min, drop_depth_max},
      {hiccup_min_s, hiccup_max_s}, {falsetto_min_s, falsetto_max_s},
      {breathy_min_s, breathy_max_s}, {rasp_min_s, rasp_max_s}, {fry_min_s, fry_max_s},
      {margin_min_s, margin_max_s}};
  for (const auto& [lo, hi] : ranges) {
    if (hi < lo) throw ConfigError("synth: range maximum below minimum");
  }
  if (hiccup_gap_s >= hiccup_min_s) throw ConfigError("synth: hiccup gap must be shorter than the hiccup");
  if (harmonics < 1) throw ConfigError("synth: harmonics must be >= 1");
  if (events_min < 1 || events_max < events_min || events_max > kNumClasses)
    throw ConfigError("synth: events per clip must satisfy 1 <= min <= max <= 9");
}

VoiceControls::VoiceControls(std::size_t n)
    : f0(n, 0.0), amp(n, 0.0), upper_gain(n, 1.0), sub_gain(n, 0.0), noise_gain(n, 0.0), fry(n, 0) {}

void VoiceControls::append(const VoiceControls& o) {
  f0.insert(f0.end(), o.f0.begin(), o.f0.end());
  amp.insert(amp.end(), o.amp.begin(), o.amp.end());
  upper_gain.insert(upper_gain.end(), o.upper_gain.begin(), o.upper_gain.end());
  sub_gain.insert(sub_gain.end(), o.sub_gain.begin(), o.sub_gain.end());
  noise_gain.insert(noise_gain.end(), o.noise_gain.begin(), o.noise_gain.end());
  fry.insert(fry.end(), o.fry.begin(), o.fry.end());
}

SingerProfile make_singer(int index, std::uint64_t corpus_seed) {
  std::mt19937_64 rng(derive_seed(corpus_seed, 0x5167e500ULL + static_cast<std::uint64_t>(index)));
  SingerProfile s;
  char id[32];
  std::snprintf(id, sizeof id, "singer%02d", index);
  s.id = id;
  const bool high_voice = index % 2 == 1;
  s.low_midi = high_voice ? uniform(rng, 55.0, 62.0) : uniform(rng, 45.0, 50.0);
  s.range_semitones = uniform(rng, 9.0, 13.0);
  s.gain = uniform(rng, 0.2, 0.4);
  s.attack_s = uniform(rng, 0.02, 0.06);
  return s;
}

TechniqueSegment plan_technique(TechniqueLabel label, const SynthSpec& spec, std::mt19937_64& rng,
                                const SingerProfile& singer) {
  TechniqueSegment seg;
  double note_midi = singer.low_midi + uniform(rng, 0.0, singer.range_semitones);
  if (label == TechniqueLabel::kFalsetto) note_midi = singer.low_midi + uniform(rng, 0.0, 0.5 * singer.range_semitones);
  const double note = midi_to_hz(note_midi);
  seg.note_hz = note;

  double motif_s = 0.0;
  switch (label) {
    case TechniqueLabel::kVibrato: motif_s = uniform(rng, spec.vibrato_min_s, spec.vibrato_max_s); break;
    case TechniqueLabel::kScooping: motif_s = uniform(rng, spec.scoop_min_s, spec.scoop_max_s); break;
    case TechniqueLabel::kBend: motif_s = uniform(rng, spec.bend_min_s, spec.bend_max_s); break;
    case TechniqueLabel::kDrop: motif_s = uniform(rng, spec.drop_min_s, spec.drop_max_s); break;
    case TechniqueLabel::kHiccup: motif_s = uniform(rng, spec.hiccup_min_s, spec.hiccup_max_s); break;
    case TechniqueLabel::kFalsetto: motif_s = uniform(rng, spec.falsetto_min_s, spec.falsetto_max_s); break;
    case TechniqueLabel::kBreathy: motif_s = uniform(rng, spec.breathy_min_s, spec.breathy_max_s); break;
    case TechniqueLabel::kRasp: motif_s = uniform(rng, spec.rasp_min_s, spec.rasp_max_s); break;
    case TechniqueLabel::kVocalFry: motif_s = uniform(rng, spec.fry_min_s, spec.fry_max_s); break;
  }
  const bool lead = label != TechniqueLabel::kScooping;
  const bool tail = label != TechniqueLabel::kDrop;
  const double before_s = lead ? uniform(rng, spec.margin_min_s, spec.margin_max_s) : 0.0;
  const double after_s = tail ? uniform(rng, spec.margin_min_s, spec.margin_max_s) : 0.0;

  const std::size_t m0 = to_samples(before_s);
  const std::size_t m1 = m0 + to_samples(motif_s);
  const std::size_t n = m1 + to_samples(after_s);
  VoiceControls& c = seg.controls;
  c = VoiceControls(n);
  std::fill(c.f0.begin(), c.f0.end(), note);
  apply_note_envelope(c, 0, n, singer.gain, label == TechniqueLabel::kScooping ? 0.02 : singer.attack_s);

  seg.event = {static_cast<double>(m0) / kSampleRate, static_cast<double>(m1) / kSampleRate, label};
  const double len = static_cast<double>(m1 - m0);
  auto u_of = [&](std::size_t i) { return static_cast<double>(i - m0) / len; };
  auto t_of = [&](std::size_t i) { return static_cast<double>(i - m0) / kSampleRate; };

  switch (label) {
    case TechniqueLabel::kVibrato: {
      const double rate = uniform(rng, spec.vibrato_rate_min_hz, spec.vibrato_rate_max_hz);
      seg.motif_rate_hz = rate;
      // Whole cycles keep the note on pitch at both ends of the motif.
      for (std::size_t i = m0; i < m1; ++i)
        c.f0[i] = note * semitones(spec.vibrato_depth_semitones * std::sin(kTwoPi * rate * t_of(i)));
      break;
    }
    case TechniqueLabel::kScooping: {
      const double depth = uniform(rng, spec.scoop_depth_min, spec.scoop_depth_max);
      for (std::size_t i = m0; i < m1; ++i) c.f0[i] = note * semitones(-depth * (1.0 - smoothstep(u_of(i))));
      break;
    }
    case TechniqueLabel::kBend: {
      const double depth = uniform(rng, spec.bend_depth_min, spec.bend_depth_max);
      for (std::size_t i = m0; i < m1; ++i) c.f0[i] = note * semitones(depth * std::sin(std::numbers::pi * u_of(i)));
      break;
    }
    case TechniqueLabel::kDrop: {
      const double depth = uniform(rng, spec.drop_depth_min, spec.drop_depth_max);
      for (std::size_t i = m0; i < m1; ++i) {
        const double u = u_of(i);
        c.f0[i] = note * semitones(-depth * u * u);
        c.amp[i] *= 1.0 - 0.8 * u;
      }
      break;
    }
    case TechniqueLabel::kHiccup: {
      const std::size_t gap_end = m0 + to_samples(spec.hiccup_gap_s);
      const double jump = semitones(spec.hiccup_jump_semitones);
      for (std::size_t i = m0; i < m1; ++i) {
        if (i < gap_end) {
          c.amp[i] = 0.0;
        } else {
          c.f0[i] = note * jump;
          const double ramp = std::min(1.0, static_cast<double>(i - gap_end) / to_samples(0.005));
          c.amp[i] *= ramp;
        }
      }
      break;
    }
    case TechniqueLabel::kFalsetto: {
      const double shift = semitones(spec.falsetto_shift_semitones);
      const double upper = db_to_gain(-spec.falsetto_upper_attenuation_db);
      for (std::size_t i = m0; i < m1; ++i) {
        c.f0[i] = note * shift;
        c.upper_gain[i] = upper;
      }
      break;
    }
    case TechniqueLabel::kBreathy: {
      const double g = db_to_gain(spec.breathy_noise_db);
      for (std::size_t i = m0; i < m1; ++i) c.noise_gain[i] = g;
      break;
    }
    case TechniqueLabel::kRasp: {
      const double g = db_to_gain(spec.rasp_subharmonic_db);
      for (std::size_t i = m0; i < m1; ++i) c.sub_gain[i] = g;
      break;
    }
    case TechniqueLabel::kVocalFry: {
      seg.motif_rate_hz = spec.fry_pulse_rate_hz;
      for (std::size_t i = m0; i < m1; ++i) {
        c.fry[i] = 1;
        c.f0[i] = spec.fry_pulse_rate_hz;
      }
      break;
    }
  }
  return seg;
}

AudioClip render_voice(const VoiceControls& c, std::mt19937_64& rng, int harmonics, int sample_rate) {
  const std::size_t n = c.size();
  AudioClip out;
  out.sample_rate = sample_rate;
  out.samples.assign(n, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  const double nyquist = 0.5 * sample_rate;

  // Glottal-like click: decaying 500 Hz burst.
  const std::size_t click_len = static_cast<std::size_t>(0.012 * sample_rate);
  std::vector<double> click(click_len);
  for (std::size_t i = 0; i < click_len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    click[i] = 2.0 * std::exp(-t / 0.004) * std::sin(kTwoPi * 500.0 * t);
  }

  double phase = 0.0;
  double sub_phase = 0.0;
  double fry_clock = 1.0;  // fires a pulse when it reaches 1
  for (std::size_t i = 0; i < n; ++i) {
    const double f0 = c.f0[i];
    const double a = c.amp[i];
    if (c.fry[i]) {
      fry_clock += f0 / sample_rate;
      if (fry_clock >= 1.0) {
        fry_clock -= 1.0 + jitter(rng);
        for (std::size_t k = 0; k < click_len && i + k < n; ++k) out.samples[i + k] += a * click[k];
      }
      phase = 0.0;
      sub_phase = 0.0;
      continue;
    }
    fry_clock = 1.0;
    if (f0 <= 0.0 || a == 0.0) {
      phase = 0.0;
      sub_phase = 0.0;
      continue;
    }
    phase += kTwoPi * f0 / sample_rate;
    if (phase > kTwoPi) phase -= kTwoPi;
    sub_phase += std::numbers::pi * f0 / sample_rate;
    if (sub_phase > kTwoPi) sub_phase -= kTwoPi;

    double v = 0.0;
    double power = 0.0;
    for (int k = 1; k <= harmonics && k * f0 < nyquist; ++k) {
      const double g = (k > 3 ? c.upper_gain[i] : 1.0) / k;
      v += g * std::sin(k * phase);
      power += 0.5 * g * g;
    }
    if (c.sub_gain[i] > 0.0) v += c.sub_gain[i] * std::sin(sub_phase);
    if (c.noise_gain[i] > 0.0) v += c.noise_gain[i] * std::sqrt(power) * gauss(rng);
    out.samples[i] += a * v;
  }
  return out;
}

PitchContour controls_to_contour(const VoiceControls& c) {
  PitchContour contour;
  const std::size_t n = c.size();
  const std::size_t frames = (n + kHopSamples - 1) / kHopSamples;
  contour.entries.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t i = t * kHopSamples;
    PitchEntry e{static_cast<double>(t) * kFrameSeconds, 0.0, 0.0};
    if (c.amp[i] > 0.0 && c.f0[i] > 0.0) {
      e.frequency = c.f0[i];
      e.confidence = 1.0;
    }
    contour.entries.push_back(e);
  }
  return contour;
}

SynthesizedTechnique synth_technique(TechniqueLabel label, const SynthSpec& spec, std::mt19937_64& rng,
                                     const SingerProfile& singer) {
  spec.validate();
  TechniqueSegment seg = plan_technique(label, spec, rng, singer);
  SynthesizedTechnique out;
  out.audio = render_voice(seg.controls, rng, spec.harmonics);
  out.event = seg.event;
  out.pitch = controls_to_contour(seg.controls);
  out.note_hz = seg.note_hz;
  out.motif_rate_hz = seg.motif_rate_hz;
  return out;
}

SynthesizedClip synth_clip(const SynthSpec& spec, const SingerProfile& singer, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::size_t total = to_samples(spec.clip_seconds);

  std::vector<TechniqueLabel> deck(kAllLabels.begin(), kAllLabels.end());
  std::shuffle(deck.begin(), deck.end(), rng);
  const int n_events = std::uniform_int_distribution<int>(spec.events_min, spec.events_max)(rng);

  // Items are either technique notes or plain notes (controls only).
  struct Item {
    VoiceControls controls;
    std::optional<Event> event;
  };
  std::vector<Item> items;
  std::size_t used = 0;
  const std::size_t budget = static_cast<std::size_t>(0.85 * static_cast<double>(total));
  for (int k = 0; k < n_events; ++k) {
    TechniqueSegment seg = plan_technique(deck[k], spec, rng, singer);
    if (k >= spec.events_min && used + seg.controls.size() > budget) break;
    used += seg.controls.size();
    items.push_back({std::move(seg.controls), seg.event});
  }
  // Plain notes fill most of the remaining time; rests take the rest.
  while (total > used + to_samples(0.6)) {
    const std::size_t len = std::min(to_samples(uniform(rng, 0.3, 0.9)), total - used - to_samples(0.3));
    if (len < to_samples(0.2)) break;
    VoiceControls c(len);
    const double hz = midi_to_hz(singer.low_midi + uniform(rng, 0.0, singer.range_semitones));
    std::fill(c.f0.begin(), c.f0.end(), hz);
    apply_note_envelope(c, 0, len, singer.gain, singer.attack_s);
    used += len;
    items.push_back({std::move(c), std::nullopt});
  }
  std::shuffle(items.begin(), items.end(), rng);

  const std::size_t slack = total > used ? total - used : 0;
  std::vector<double> rest_weights(items.size() + 1);
  for (auto& w : rest_weights) w = uniform(rng, 0.0, 1.0);
  double wsum = 0.0;
  for (double w : rest_weights) wsum += w;

  VoiceControls all(0);
  SynthesizedClip clip;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::size_t rest = wsum > 0 ? static_cast<std::size_t>(slack * rest_weights[k] / wsum) : 0;
    all.append(VoiceControls(rest));
    const double start = static_cast<double>(all.size()) / kSampleRate;
    if (items[k].event) {
      Event e = *items[k].event;
      e.onset += start;
      e.offset += start;
      clip.events.push_back(e);
    }
    all.append(items[k].controls);
  }
  if (all.size() < total) all.append(VoiceControls(total - all.size()));
  const std::size_t n = std::min(all.size(), total);
  for (auto* v : {&all.f0, &all.amp, &all.upper_gain, &all.sub_gain, &all.noise_gain}) v->resize(n);
  all.fry.resize(n);
  for (auto& e : clip.events) e.offset = std::min(e.offset, spec.clip_seconds);

  std::sort(clip.events.begin(), clip.events.end(),
            [](const Event& a, const Event& b) { return a.onset < b.onset; });
  clip.audio = render_voice(all, rng, spec.harmonics);
  clip.pitch = controls_to_contour(all);
  return clip;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::string> CorpusManifest::singers() const {
  std::set<std::string> s;
  for (const auto& c : clips) s.insert(c.singer_id);
  return {s.begin(), s.end()};
}

std::string manifest_to_json(const CorpusManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["sample_rate"] = kSampleRate;
  j["spec"] = nlohmann::json(m.spec);
  j["clips"] = nlohmann::ordered_json::array();
  for (const auto& c : m.clips) {
    j["clips"].push_back({{"id", c.id},
                          {"wav", c.wav},
                          {"annotation_csv", c.annotation_csv},
                          {"pitch_csv", c.pitch_csv},
                          {"singer_id", c.singer_id},
                          {"seed", c.seed}});
  }
  return j.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write manifest: " + path.string());
  f << manifest_to_json(m);
  if (!f) throw InputError("failed writing manifest: " + path.string());
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": invalid manifest JSON: " + e.what());
  }
  CorpusManifest m;
  m.root = path.parent_path();
  try {
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("spec")) m.spec = j.at("spec").get<SynthSpec>();
    for (const auto& c : j.at("clips")) {
      ManifestEntry e;
      e.wav = c.at("wav").get<std::string>();
      e.annotation_csv = c.at("annotation_csv").get<std::string>();
      e.pitch_csv = c.value("pitch_csv", std::string{});
      e.singer_id = c.at("singer_id").get<std::string>();
      e.seed = c.value("seed", std::uint64_t{0});
      e.id = c.value("id", std::filesystem::path(e.wav).stem().string());
      m.clips.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed manifest: " + e.what());
  }
  if (m.clips.empty()) throw InputError(path.string() + ": manifest lists no clips");
  return m;
}

CorpusManifest synth_corpus(const SynthSpec& spec, int n_clips, int n_singers, std::uint64_t seed,
                            const std::filesystem::path& out_dir, int threads) {
  if (n_clips < 1) throw ConfigError("synth_corpus: n_clips must be >= 1");
  if (n_singers < 1) throw ConfigError("synth_corpus: singer count must be >= 1");
  spec.validate();
  std::filesystem::create_directories(out_dir / "clips");

  std::vector<SingerProfile> singers;
  for (int s = 0; s < n_singers; ++s) singers.push_back(make_singer(s, seed));

  CorpusManifest m;
  m.seed = seed;
  m.spec = spec;
  m.root = out_dir;
  m.clips.resize(static_cast<std::size_t>(n_clips));
  parallel_for(m.clips.size(), threads, [&](std::size_t i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "clip%04zu", i);
    ManifestEntry& e = m.clips[i];
    e.id = stem;
    e.wav = std::string("clips/") + stem + ".wav";
    e.annotation_csv = std::string("clips/") + stem + ".csv";
    e.pitch_csv = std::string("clips/") + stem + ".f0.csv";
    const SingerProfile& singer = singers[i % singers.size()];
    e.singer_id = singer.id;
    e.seed = derive_seed(seed, i);
    const SynthesizedClip clip = synth_clip(spec, singer, e.seed);
    write_wav(out_dir / e.wav, clip.audio);
    save_annotations(out_dir / e.annotation_csv, clip.events);
    save_pitch_csv(out_dir / e.pitch_csv, clip.pitch);
  });
  save_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace primadnn
