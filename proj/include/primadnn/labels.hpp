#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace primadnn {

/// The nine singing techniques, in canonical (alphabetical) order. The
/// integer value is the row index in every label/activation roll.
enum class TechniqueLabel : int {
  kBend = 0,
  kBreathy,
  kDrop,
  kFalsetto,
  kHiccup,
  kRasp,
  kScooping,
  kVibrato,
  kVocalFry,
};

inline constexpr int kNumClasses = 9;

inline constexpr std::array<TechniqueLabel, kNumClasses> kAllLabels = {
    TechniqueLabel::kBend,     TechniqueLabel::kBreathy,  TechniqueLabel::kDrop,
    TechniqueLabel::kFalsetto, TechniqueLabel::kHiccup,   TechniqueLabel::kRasp,
    TechniqueLabel::kScooping, TechniqueLabel::kVibrato,  TechniqueLabel::kVocalFry,
};

std::string_view label_name(TechniqueLabel label);
std::optional<TechniqueLabel> parse_label(std::string_view name);

inline int label_index(TechniqueLabel label) { return static_cast<int>(label); }
TechniqueLabel label_from_index(int index);

}  // namespace primadnn
