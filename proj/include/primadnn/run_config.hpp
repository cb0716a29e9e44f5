#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "primadnn/frontend.hpp"
#include "primadnn/model.hpp"
#include "primadnn/trainer.hpp"

namespace primadnn {

struct EvalConfig {
  double threshold = 0.5;
  double segment_seconds = 0.1;
};

/// Ablation switches, one per comparison condition.
struct AblationFlags {
  bool no_pitch = false;
  bool single_resolution = false;  // the 2048-sample mel channel in every mel slot
  bool no_se = false;
  bool batch_norm = false;
  bool kernels_3x3 = false;

  bool operator==(const AblationFlags&) const = default;
};

/// The six conditions of the ablation table, "full" first.
const std::vector<std::string>& ablation_conditions();
AblationFlags ablation_for(const std::string& condition);
/// Row label used in reports ("Full", "No pitch", ...).
std::string condition_display_name(const std::string& condition);

struct RunConfig {
  FrontendConfig frontend;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  AblationFlags ablation;
  int folds = 7;
  std::uint64_t fold_seed = 0;
  double clip_seconds = 10.0;

  /// Model configuration after applying the ablation flags (channel count
  /// follows feature_channels()).
  ModelConfig effective_model() const;
  /// Names of the feature channels the network consumes, in order.
  std::vector<std::string> feature_channels() const;
  void validate() const;
};

nlohmann::json to_json_value(const FrontendConfig& c);
nlohmann::json to_json_value(const ModelConfig& c);
nlohmann::json to_json_value(const TrainConfig& c);
nlohmann::json to_json_value(const FocalLossParams& c);
nlohmann::json to_json_value(const RunConfig& c);

/// Missing keys keep their defaults; unknown keys are rejected.
FrontendConfig frontend_from_json(const nlohmann::json& j);
ModelConfig model_from_json(const nlohmann::json& j);
TrainConfig train_from_json(const nlohmann::json& j);
FocalLossParams focal_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace primadnn
