#pragma once

#include <filesystem>
#include <vector>

#include "primadnn/audio.hpp"
#include "primadnn/frontend.hpp"

namespace primadnn {

struct PitchEntry {
  double time = 0.0;        // seconds
  double frequency = 0.0;   // Hz, 0 = unvoiced
  double confidence = 0.0;  // [0, 1]
};

/// f0 track from an external estimator, strictly increasing in time.
struct PitchContour {
  std::vector<PitchEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

inline constexpr double kDefaultVoicingThreshold = 0.5;

/// Throws InputError on non-monotone times or out-of-range values.
void validate_contour(const PitchContour& contour);

/// Parses `time,frequency,confidence` rows. A first line whose first field is
/// not numeric is treated as a header. Errors name the 1-based line.
PitchContour load_pitch_csv(const std::filesystem::path& path);
PitchContour parse_pitch_csv(const std::string& text, const std::string& source = "<string>");
void save_pitch_csv(const std::filesystem::path& path, const PitchContour& contour);

struct FallbackPitchOptions {
  double min_hz = 50.0;
  double max_hz = 1100.0;
  int integration_samples = 1024;
  double voicing_threshold = kDefaultVoicingThreshold;
};

/// Normalized-autocorrelation f0 estimate, one entry per 10 ms frame centered
/// at t * hop. Confidence is the normalized peak height; frames below the
/// voicing threshold report frequency 0.
PitchContour estimate_pitch_fallback(const AudioClip& clip, const FallbackPitchOptions& opts = {});

/// Binary n_mels x n_frames matrix (row-major) with at most one 1 per column.
struct Pitchgram {
  int n_mels = 0;
  int n_frames = 0;
  std::vector<float> data;

  float at(int m, int t) const { return data[static_cast<std::size_t>(m) * n_frames + t]; }
  /// Active band of frame t, or -1 when the frame is unvoiced.
  int active_band(int t) const;
};

/// Samples the contour at each frame center (t * frame_seconds) by
/// nearest-time lookup and marks the band whose center frequency is nearest
/// to the f0 when the frame is voiced with confidence >= threshold.
Pitchgram contour_to_pitchgram(const PitchContour& contour, const MelFilterbank& fb, int n_frames,
                               double voicing_threshold = kDefaultVoicingThreshold,
                               double frame_seconds = kFrameSeconds);

/// Index of the band center nearest to `hz` (lower index on ties).
int nearest_band(const MelFilterbank& fb, double hz);

}  // namespace primadnn
