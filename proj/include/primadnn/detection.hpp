#pragma once

#include <array>
#include <string>

#include "primadnn/events.hpp"

namespace primadnn {

inline constexpr double kDetectionThreshold = 0.5;
inline constexpr double kSegmentSeconds = 0.100;

/// cell = 1 iff activation >= threshold.
DetectionRoll binarize(const ActivationRoll& activations, double threshold = kDetectionThreshold);

/// Maximal runs of active frames become [first * dt, (last + 1) * dt).
EventList roll_to_events(const Roll& roll, double frame_seconds = kFrameSeconds);

/// Frame t is active iff its center (t + 0.5) * dt lies in [onset, offset).
/// Throws std::invalid_argument for an event with onset >= offset.
Roll events_to_roll(const EventList& events, int n_frames, double frame_seconds = kFrameSeconds,
                    int n_classes = kNumClasses);

struct ClassCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  bool active() const { return tp + fp + fn > 0; }
  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ClassCounts&) const = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R); every undefined ratio is 0.
Scores scores_from_counts(const ClassCounts& c);

/// Segment-based counts and scores. Counts from several clips are combined
/// with operator+= before reading the scores.
struct SegmentMetrics {
  std::array<ClassCounts, kNumClasses> counts{};
  double segment_seconds = kSegmentSeconds;

  Scores class_scores(int c) const { return scores_from_counts(counts[static_cast<std::size_t>(c)]); }
  ClassCounts pooled() const;
  /// Unweighted mean of class F over classes with any reference or
  /// predicted activity.
  double macro_f() const;
  Scores micro() const { return scores_from_counts(pooled()); }

  SegmentMetrics& operator+=(const SegmentMetrics& o);
};

/// Splits [0, total_duration) into ceil(total / segment) segments; a
/// (segment, class) cell is active when any event of that class overlaps
/// the segment.
SegmentMetrics segment_metrics(const EventList& reference, const EventList& prediction,
                               double total_duration, double segment_seconds = kSegmentSeconds);

/// Number of segments covering `total_duration`.
int segment_count(double total_duration, double segment_seconds);

std::string metrics_to_json(const SegmentMetrics& m, int indent = 2);
/// Plain-text table: per-class rows then an overall row; columns Macro-F,
/// Micro-F, P, R (per-class rows show F, F, P, R).
std::string metrics_to_table(const SegmentMetrics& m);

}  // namespace primadnn
