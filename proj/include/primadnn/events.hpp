#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "primadnn/audio.hpp"
#include "primadnn/labels.hpp"

namespace primadnn {

/// Binary class x frame activity, rows in canonical label order.
using Roll = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelRoll = Roll;
using DetectionRoll = Roll;

/// Per-frame class probabilities, classes x frames.
using ActivationRoll = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Event {
  double onset = 0.0;   // seconds, inclusive
  double offset = 0.0;  // seconds, exclusive
  TechniqueLabel label = TechniqueLabel::kBend;

  bool operator==(const Event&) const = default;
};

using EventList = std::vector<Event>;

/// Sorts by (label, onset) and merges overlapping or touching events of the
/// same label.
EventList normalize_events(EventList events);

}  // namespace primadnn
