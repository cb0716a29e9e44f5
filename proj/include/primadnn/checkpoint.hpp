#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "primadnn/frontend.hpp"
#include "primadnn/loss.hpp"
#include "primadnn/model.hpp"

namespace primadnn {

/// Everything needed to run inference on raw features: weights, the
/// train-split normalization and the channel selection.
struct Checkpoint {
  ModelParams<float> params;
  ChannelStats stats;
  std::vector<std::string> channels;
  LossKind loss = LossKind::kFocal;
  FocalLossParams focal;
  nlohmann::json run_config;  // informational copy of the run configuration
};

/// Binary layout: "PDNC", u32 version, u32 header length, JSON header
/// (model config, stats, channels, loss), u32 block count, then per block
/// u32 name length, name, u32 rank, u32 dims, u64 count, float64 values.
/// All integers and floats little-endian.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace primadnn
