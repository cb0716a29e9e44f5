#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "primadnn/events.hpp"
#include "primadnn/frontend.hpp"
#include "primadnn/pitch.hpp"
#include "primadnn/synth.hpp"

namespace primadnn {

/// One 10 s network example: the full feature stack (three mel channels
/// plus pitchgram) and its reference events.
struct DatasetClip {
  std::string id;
  std::string singer_id;
  EventList events;
  double duration_seconds = 0.0;  // before zero padding
  FeatureStack features;
};

struct Dataset {
  std::vector<DatasetClip> clips;

  std::vector<std::string> singers() const;
  /// Indices of clips whose singer is in `singers`, in dataset order.
  std::vector<std::size_t> indices_for(std::span<const std::string> singers) const;
};

/// Mel channels for every configured window plus the pitchgram of
/// `contour`, all with `n_frames` frames.
FeatureStack extract_clip_features(const AudioClip& clip, const PitchContour& contour,
                                   const FrontendConfig& cfg, int n_frames,
                                   double voicing_threshold = kDefaultVoicingThreshold);

/// Shifts a contour by -start_seconds and keeps entries within [0, length).
PitchContour slice_contour(const PitchContour& contour, double start_seconds, double length_seconds);

struct DatasetOptions {
  FrontendConfig frontend;
  double clip_seconds = 10.0;
  double voicing_threshold = kDefaultVoicingThreshold;
  int threads = 1;
  /// When set, feature stacks are read from / written to this directory.
  std::filesystem::path cache_dir;
};

/// Loads every manifest entry, cuts it into clips, and computes features.
/// Entries without a pitch CSV use the fallback estimator.
Dataset load_dataset(const CorpusManifest& manifest, const DatasetOptions& options);

/// Stable file-name key of a frontend configuration.
std::string frontend_key(const FrontendConfig& cfg);

}  // namespace primadnn
