#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "primadnn/audio.hpp"
#include "primadnn/events.hpp"

namespace primadnn {

/// Parses `onset,offset,label` rows (optional header). Errors name the
/// 1-based line of the offending row.
EventList parse_annotations(const std::string& text, const std::string& source = "<string>");
EventList load_annotations(const std::filesystem::path& path);

/// Writes shortest round-trip decimal representations, so a save/load cycle
/// is exact.
void save_annotations(const std::filesystem::path& path, const EventList& events);
std::string format_annotations(const EventList& events);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

struct Track {
  std::string singer_id;
  std::filesystem::path audio_path;
  EventList events;
  std::optional<std::filesystem::path> pitch_path;
};

struct ClipSegment {
  AudioClip clip;
  EventList events;
  double start_seconds = 0.0;
};

/// Cuts audio into consecutive non-overlapping windows of `clip_seconds`
/// (the final remainder is kept short). Events are clipped to each window
/// and re-based to window-local time. Events reaching past the audio end
/// are truncated with a warning on stderr.
std::vector<ClipSegment> segment_track(const AudioClip& audio, const EventList& events,
                                       double clip_seconds = 10.0);

}  // namespace primadnn
