#include "primadnn/labels.hpp"

#include <stdexcept>

namespace primadnn {

namespace {
constexpr std::array<std::string_view, kNumClasses> kNames = {
    "bend", "breathy", "drop", "falsetto", "hiccup",
    "rasp", "scooping", "vibrato", "vocal_fry",
};
}  // namespace

std::string_view label_name(TechniqueLabel label) {
  return kNames.at(static_cast<std::size_t>(label));
}

std::optional<TechniqueLabel> parse_label(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (kNames[i] == name) return static_cast<TechniqueLabel>(i);
  }
  // The annotation convention of the source data spells it with a space.
  if (name == "vocal fry") return TechniqueLabel::kVocalFry;
  return std::nullopt;
}

TechniqueLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw std::out_of_range("label index " + std::to_string(index));
  }
  return static_cast<TechniqueLabel>(index);
}

}  // namespace primadnn
