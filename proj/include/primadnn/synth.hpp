#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "primadnn/audio.hpp"
#include "primadnn/events.hpp"
#include "primadnn/pitch.hpp"

namespace primadnn {

/// Motif parameters of the synthetic technique corpus. Durations are in
/// seconds, pitch offsets in semitones, levels in dB.
struct SynthSpec {
  double vibrato_rate_min_hz = 5.0;
  double vibrato_rate_max_hz = 7.0;
  double vibrato_depth_semitones = 1.0;
  double vibrato_min_s = 0.6;
  double vibrato_max_s = 1.4;

  double scoop_min_s = 0.15;
  double scoop_max_s = 0.30;
  double scoop_depth_min = 2.0;
  double scoop_depth_max = 4.0;

  double bend_min_s = 0.3;
  double bend_max_s = 0.6;
  double bend_depth_min = 1.0;
  double bend_depth_max = 2.0;

  double drop_min_s = 0.2;
  double drop_max_s = 0.4;
  double drop_depth_min = 3.0;
  double drop_depth_max = 7.0;

  double hiccup_min_s = 0.10;
  double hiccup_max_s = 0.18;
  double hiccup_jump_semitones = 5.0;
  double hiccup_gap_s = 0.03;

  double falsetto_min_s = 0.5;
  double falsetto_max_s = 1.2;
  double falsetto_shift_semitones = 9.0;
  double falsetto_upper_attenuation_db = 12.0;

  double breathy_min_s = 0.5;
  double breathy_max_s = 1.2;
  double breathy_noise_db = -10.0;  // noise level relative to the voice

  double rasp_min_s = 0.4;
  double rasp_max_s = 1.0;
  double rasp_subharmonic_db = -6.0;  // f0/2 relative to f0

  double fry_min_s = 0.3;
  double fry_max_s = 0.8;
  double fry_pulse_rate_hz = 40.0;

  int harmonics = 8;
  double margin_min_s = 0.12;  // plain singing around a motif
  double margin_max_s = 0.30;
  int events_min = 3;
  int events_max = 8;
  double clip_seconds = 10.0;

  /// Throws ConfigError if any rate, depth or duration is not positive.
  void validate() const;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthSpec, vibrato_rate_min_hz,
    vibrato_rate_max_hz, vibrato_depth_semitones, vibrato_min_s, vibrato_max_s, scoop_min_s,
    scoop_max_s, scoop_depth_min, scoop_depth_max, bend_min_s, bend_max_s, bend_depth_min,
    bend_depth_max, drop_min_s, drop_max_s, drop_depth_min, drop_depth_max, hiccup_min_s,
    hiccup_max_s, hiccup_jump_semitones, hiccup_gap_s, falsetto_min_s, falsetto_max_s,
    falsetto_shift_semitones, falsetto_upper_attenuation_db, breathy_min_s, breathy_max_s,
    breathy_noise_db, rasp_min_s, rasp_max_s, rasp_subharmonic_db, fry_min_s, fry_max_s,
    fry_pulse_rate_hz, harmonics, margin_min_s, margin_max_s, events_min, events_max,
    clip_seconds)

/// Voice character of one pseudo-singer.
struct SingerProfile {
  std::string id = "singer00";
  double low_midi = 52.0;   // lowest note
  double range_semitones = 12.0;
  double gain = 0.3;
  double attack_s = 0.03;
};

SingerProfile make_singer(int index, std::uint64_t corpus_seed);

/// Per-sample synthesis controls.
struct VoiceControls {
  std::vector<double> f0;          // Hz; 0 = silent
  std::vector<double> amp;         // envelope
  std::vector<double> upper_gain;  // gain of harmonics above the 3rd
  std::vector<double> sub_gain;    // f0/2 component relative to the fundamental
  std::vector<double> noise_gain;  // noise RMS relative to the harmonic RMS
  std::vector<std::uint8_t> fry;   // pulse-train source instead of harmonics

  explicit VoiceControls(std::size_t n = 0);
  std::size_t size() const { return f0.size(); }
  void append(const VoiceControls& other);
};

struct TechniqueSegment {
  VoiceControls controls;
  Event event;               // segment-local time
  double note_hz = 0.0;
  double motif_rate_hz = 0.0;  // vibrato rate / fry pulse rate where applicable
};

/// One sung note carrying the motif of `label`, with plain singing margins
/// around it (scooping sits at the note start, drop at the end).
TechniqueSegment plan_technique(TechniqueLabel label, const SynthSpec& spec, std::mt19937_64& rng,
                                const SingerProfile& singer);

/// Renders controls to audio (harmonic source with 1/k rolloff, optional
/// subharmonic, breath noise and fry pulses).
AudioClip render_voice(const VoiceControls& controls, std::mt19937_64& rng,
                       int harmonics = 8, int sample_rate = kSampleRate);

/// Generator-truth f0 at each 10 ms frame (t * hop). Voiced frames have
/// confidence 1; silent frames frequency 0 and confidence 0.
PitchContour controls_to_contour(const VoiceControls& controls);

struct SynthesizedTechnique {
  AudioClip audio;
  Event event;
  PitchContour pitch;
  double note_hz = 0.0;
  double motif_rate_hz = 0.0;
};

SynthesizedTechnique synth_technique(TechniqueLabel label, const SynthSpec& spec,
                                     std::mt19937_64& rng, const SingerProfile& singer = {});

struct SynthesizedClip {
  AudioClip audio;
  EventList events;
  PitchContour pitch;
};

/// One clip of `spec.clip_seconds` with events_min..events_max motifs
/// (distinct labels) interleaved with plain notes and short rests.
SynthesizedClip synth_clip(const SynthSpec& spec, const SingerProfile& singer, std::uint64_t seed);

struct ManifestEntry {
  std::string id;
  std::string wav;             // paths relative to the manifest directory
  std::string annotation_csv;
  std::string pitch_csv;
  std::string singer_id;
  std::uint64_t seed = 0;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  SynthSpec spec;
  std::vector<ManifestEntry> clips;
  std::filesystem::path root;  // directory holding the manifest (not serialized)

  std::vector<std::string> singers() const;
};

std::string manifest_to_json(const CorpusManifest& m);
CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const CorpusManifest& m);

/// Per-clip seed derived from the corpus seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Writes `n_clips` WAV/annotation/pitch triples plus manifest.json under
/// `out_dir`. Clip i belongs to pseudo-singer i mod n_singers.
CorpusManifest synth_corpus(const SynthSpec& spec, int n_clips, int n_singers, std::uint64_t seed,
                            const std::filesystem::path& out_dir, int threads = 1);

}  // namespace primadnn
