#include "primadnn/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace primadnn {

EventList normalize_events(EventList events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.label != b.label) return a.label < b.label;
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.offset < b.offset;
  });
  EventList out;
  for (const auto& e : events) {
    if (!out.empty() && out.back().label == e.label && e.onset <= out.back().offset) {
      out.back().offset = std::max(out.back().offset, e.offset);
    } else {
      out.push_back(e);
    }
  }
  return out;
}

DetectionRoll binarize(const ActivationRoll& activations, double threshold) {
  DetectionRoll out(activations.rows(), activations.cols());
  for (Eigen::Index r = 0; r < activations.rows(); ++r) {
    for (Eigen::Index c = 0; c < activations.cols(); ++c) {
      out(r, c) = activations(r, c) >= threshold ? 1 : 0;
    }
  }
  return out;
}

EventList roll_to_events(const Roll& roll, double frame_seconds) {
  EventList events;
  for (Eigen::Index r = 0; r < roll.rows(); ++r) {
    Eigen::Index t = 0;
    while (t < roll.cols()) {
      if (!roll(r, t)) {
        ++t;
        continue;
      }
      const Eigen::Index start = t;
      while (t < roll.cols() && roll(r, t)) ++t;
      events.push_back({static_cast<double>(start) * frame_seconds,
                        static_cast<double>(t) * frame_seconds, label_from_index(static_cast<int>(r))});
    }
  }
  return events;
}

Roll events_to_roll(const EventList& events, int n_frames, double frame_seconds, int n_classes) {
  Roll roll = Roll::Zero(n_classes, n_frames);
  for (const auto& e : events) {
    if (!(e.onset < e.offset)) {
      throw std::invalid_argument("event onset must precede its offset");
    }
    const int row = label_index(e.label);
    if (row >= n_classes) throw std::invalid_argument("event label outside the roll");
    // First frame whose center is >= onset, then walk while center < offset.
    int t = std::max(0, static_cast<int>(std::floor(e.onset / frame_seconds - 0.5)));
    while (t < n_frames && (t + 0.5) * frame_seconds < e.onset) ++t;
    while (t > 0 && (t - 0.5) * frame_seconds >= e.onset) --t;
    for (; t < n_frames && (t + 0.5) * frame_seconds < e.offset; ++t) {
      roll(row, t) = 1;
    }
  }
  return roll;
}

Scores scores_from_counts(const ClassCounts& c) {
  Scores s;
  if (c.tp + c.fp > 0) s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (s.precision + s.recall > 0.0) {
    s.f = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

ClassCounts SegmentMetrics::pooled() const {
  ClassCounts total;
  for (const auto& c : counts) total += c;
  return total;
}

double SegmentMetrics::macro_f() const {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!counts[static_cast<std::size_t>(c)].active()) continue;
    sum += class_scores(c).f;
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

SegmentMetrics& SegmentMetrics::operator+=(const SegmentMetrics& o) {
  for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += o.counts[c];
  return *this;
}

int segment_count(double total_duration, double segment_seconds) {
  if (!(total_duration >= 0.0)) throw std::invalid_argument("negative duration");
  if (!(segment_seconds > 0.0)) throw std::invalid_argument("segment length must be positive");
  int n = static_cast<int>(std::ceil(total_duration / segment_seconds));
  // Guard against ratios like 0.3 / 0.1 = 3.0000000000000004.
  while (n > 0 && (n - 1) * segment_seconds >= total_duration) --n;
  while (n * segment_seconds < total_duration) ++n;
  return n;
}

namespace {

// Segment k spans [k * seg, (k + 1) * seg).
bool overlaps(const Event& e, int k, double seg) {
  return e.onset < (k + 1) * seg && e.offset > k * seg;
}

void mark(const EventList& events, int n_segments, double seg, std::vector<std::uint8_t>& grid) {
  for (const auto& e : events) {
    if (!(e.onset < e.offset)) throw std::invalid_argument("event onset must precede its offset");
    const int row = label_index(e.label);
    if (row < 0 || row >= kNumClasses) throw std::invalid_argument("unknown event label");
    if (n_segments == 0) continue;
    int k = std::clamp(static_cast<int>(std::floor(e.onset / seg)), 0, n_segments - 1);
    while (k > 0 && overlaps(e, k - 1, seg)) --k;
    while (k < n_segments && !overlaps(e, k, seg)) {
      if (k * seg >= e.offset) break;
      ++k;
    }
    for (; k < n_segments && overlaps(e, k, seg); ++k) {
      grid[static_cast<std::size_t>(row) * n_segments + k] = 1;
    }
  }
}

}  // namespace

SegmentMetrics segment_metrics(const EventList& reference, const EventList& prediction,
                               double total_duration, double segment_seconds) {
  const int n = segment_count(total_duration, segment_seconds);
  std::vector<std::uint8_t> ref(static_cast<std::size_t>(kNumClasses) * n, 0);
  std::vector<std::uint8_t> est(ref.size(), 0);
  mark(reference, n, segment_seconds, ref);
  mark(prediction, n, segment_seconds, est);
  SegmentMetrics m;
  m.segment_seconds = segment_seconds;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& cc = m.counts[static_cast<std::size_t>(c)];
    for (int k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(c) * n + k;
      if (ref[i] && est[i]) ++cc.tp;
      else if (est[i]) ++cc.fp;
      else if (ref[i]) ++cc.fn;
    }
  }
  return m;
}

std::string metrics_to_json(const SegmentMetrics& m, int indent) {
  nlohmann::ordered_json j;
  j["segment_seconds"] = m.segment_seconds;
  const Scores micro = m.micro();
  const ClassCounts pooled = m.pooled();
  double macro_p = 0.0, macro_r = 0.0;
  int active = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!m.counts[static_cast<std::size_t>(c)].active()) continue;
    macro_p += m.class_scores(c).precision;
    macro_r += m.class_scores(c).recall;
    ++active;
  }
  if (active > 0) macro_p /= active, macro_r /= active;
  j["overall"] = {{"macro_f", m.macro_f()},
                  {"macro_precision", macro_p},
                  {"macro_recall", macro_r},
                  {"micro_f", micro.f},
                  {"precision", micro.precision},
                  {"recall", micro.recall},
                  {"tp", pooled.tp},
                  {"fp", pooled.fp},
                  {"fn", pooled.fn}};
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& cc = m.counts[static_cast<std::size_t>(c)];
    const Scores s = m.class_scores(c);
    classes[std::string(label_name(label_from_index(c)))] = {
        {"f", s.f}, {"precision", s.precision}, {"recall", s.recall},
        {"tp", cc.tp}, {"fp", cc.fp}, {"fn", cc.fn}};
  }
  j["class_wise"] = classes;
  return j.dump(indent);
}

std::string metrics_to_table(const SegmentMetrics& m) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s\n", "", "Macro-F", "Micro-F", "P", "R");
  out << line;
  for (int c = 0; c < kNumClasses; ++c) {
    const Scores s = m.class_scores(c);
    std::snprintf(line, sizeof line, "%-12s %7.1f%% %7.1f%% %7.1f%% %7.1f%%\n",
                  std::string(label_name(label_from_index(c))).c_str(), 100 * s.f, 100 * s.f,
                  100 * s.precision, 100 * s.recall);
    out << line;
  }
  const Scores micro = m.micro();
  std::snprintf(line, sizeof line, "%-12s %7.1f%% %7.1f%% %7.1f%% %7.1f%%\n", "overall",
                100 * m.macro_f(), 100 * micro.f, 100 * micro.precision, 100 * micro.recall);
  out << line;
  return out.str();
}

}  // namespace primadnn
