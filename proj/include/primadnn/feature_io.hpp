#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "primadnn/frontend.hpp"

namespace primadnn {

inline constexpr std::uint32_t kFeatureFileVersion = 1;

/// Layout: "PDNF", version, channels, n_mels, n_frames (u32 each, little
/// endian) followed by channels * n_mels * n_frames float32 values.
void write_feature_file(const std::filesystem::path& path, const FeatureStack& stack);

/// Channel names are not stored; they are reconstructed from the channel
/// count (4: mel2048, mel1024, mel512, pitchgram; 3: the mel channels).
FeatureStack read_feature_file(const std::filesystem::path& path);

std::vector<std::string> default_channel_names(int channels);

}  // namespace primadnn
