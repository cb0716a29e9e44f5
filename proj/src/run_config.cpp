#include "primadnn/run_config.hpp"

#include <fstream>
#include <set>

namespace primadnn {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

const std::vector<std::string>& ablation_conditions() {
  static const std::vector<std::string> names{"full", "no_pitch", "single_resolution", "no_se", "batch_norm", "3x3"};
  return names;
}

AblationFlags ablation_for(const std::string& condition) {
  AblationFlags f;
  if (condition == "full") return f;
  if (condition == "no_pitch") f.no_pitch = true;
  else if (condition == "single_resolution") f.single_resolution = true;
  else if (condition == "no_se") f.no_se = true;
  else if (condition == "batch_norm") f.batch_norm = true;
  else if (condition == "3x3") f.kernels_3x3 = true;
  else throw ConfigError("unknown ablation condition '" + condition + "'");
  return f;
}

std::string condition_display_name(const std::string& condition) {
  if (condition == "full") return "Full";
  if (condition == "no_pitch") return "No pitch";
  if (condition == "single_resolution") return "Single resolution";
  if (condition == "no_se") return "No SE";
  if (condition == "batch_norm") return "BN";
  if (condition == "3x3") return "3x3";
  return condition;
}

std::vector<std::string> RunConfig::feature_channels() const {
  std::vector<std::string> names;
  if (ablation.single_resolution) {
    // Same channel count as the full model; only the resolution varies.
    for (std::size_t i = 0; i < frontend.window_lengths.size(); ++i)
      names.push_back(mel_channel_name(frontend.window_lengths.front()));
  } else {
    for (int w : frontend.window_lengths) names.push_back(mel_channel_name(w));
  }
  if (!ablation.no_pitch) names.push_back(kPitchgramChannel);
  return names;
}

ModelConfig RunConfig::effective_model() const {
  ModelConfig m = model;
  m.in_channels = static_cast<int>(feature_channels().size());
  m.n_mels = frontend.n_mels;
  if (ablation.no_se) m.se_enabled = false;
  if (ablation.batch_norm) m.norm = NormKind::kBatch;
  if (ablation.kernels_3x3)
    for (auto& k : m.kernel_sizes) k = {3, 3};
  return m;
}

void RunConfig::validate() const {
  frontend.validate(kSampleRate);
  effective_model().validate();
  train.validate();
  if (folds < 3) throw ConfigError("folds must be >= 3");
  if (!(eval.segment_seconds > 0.0)) throw ConfigError("eval.segment_seconds must be positive");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds must be positive");
}

json to_json_value(const FrontendConfig& c) {
  return {{"window_lengths", c.window_lengths}, {"fft_length", c.fft_length},
          {"hop_seconds", c.hop_seconds},       {"n_mels", c.n_mels},
          {"fmin", c.fmin},                     {"fmax", c.fmax},
          {"log_floor", c.log_floor}};
}

FrontendConfig frontend_from_json(const json& j) {
  const std::string w = "frontend";
  reject_unknown(j, {"window_lengths", "fft_length", "hop_seconds", "n_mels", "fmin", "fmax", "log_floor"}, w);
  FrontendConfig c;
  read(j, "window_lengths", c.window_lengths, w);
  read(j, "fft_length", c.fft_length, w);
  read(j, "hop_seconds", c.hop_seconds, w);
  read(j, "n_mels", c.n_mels, w);
  read(j, "fmin", c.fmin, w);
  read(j, "fmax", c.fmax, w);
  read(j, "log_floor", c.log_floor, w);
  return c;
}

json to_json_value(const ModelConfig& c) {
  json kernels = json::array();
  for (const auto& [r, k] : c.kernel_sizes) kernels.push_back({r, k});
  return {{"in_channels", c.in_channels}, {"n_mels", c.n_mels},
          {"conv_channels", c.conv_channels}, {"kernel_sizes", kernels},
          {"freq_pool", c.freq_pool}, {"se_enabled", c.se_enabled},
          {"se_ratio", c.se_ratio}, {"norm", to_string(c.norm)},
          {"norm_eps", c.norm_eps}, {"lstm_hidden", c.lstm_hidden},
          {"n_classes", c.n_classes}, {"output_prior", c.output_prior}};
}

ModelConfig model_from_json(const json& j) {
  const std::string w = "model";
  reject_unknown(j, {"in_channels", "n_mels", "conv_channels", "kernel_sizes", "freq_pool", "se_enabled",
                     "se_ratio", "norm", "norm_eps", "lstm_hidden", "n_classes", "output_prior"}, w);
  ModelConfig c;
  read(j, "in_channels", c.in_channels, w);
  read(j, "n_mels", c.n_mels, w);
  read(j, "conv_channels", c.conv_channels, w);
  if (j.contains("kernel_sizes")) {
    c.kernel_sizes.clear();
    for (const auto& k : j.at("kernel_sizes")) {
      if (k.is_number_integer()) {
        c.kernel_sizes.emplace_back(k.get<int>(), k.get<int>());
      } else if (k.is_array() && k.size() == 2) {
        c.kernel_sizes.emplace_back(k[0].get<int>(), k[1].get<int>());
      } else {
        throw ConfigError("model.kernel_sizes: entries must be n or [rows, cols]");
      }
    }
  }
  read(j, "freq_pool", c.freq_pool, w);
  read(j, "se_enabled", c.se_enabled, w);
  read(j, "se_ratio", c.se_ratio, w);
  if (j.contains("norm")) c.norm = parse_norm_kind(j.at("norm").get<std::string>());
  read(j, "norm_eps", c.norm_eps, w);
  read(j, "lstm_hidden", c.lstm_hidden, w);
  read(j, "n_classes", c.n_classes, w);
  read(j, "output_prior", c.output_prior, w);
  return c;
}

json to_json_value(const FocalLossParams& c) {
  return {{"alpha", c.alpha},
          {"gamma", c.gamma},
          {"alpha_mode", c.alpha_mode == AlphaMode::kBalanced ? "balanced" : "constant"}};
}

FocalLossParams focal_from_json(const json& j) {
  const std::string w = "focal";
  reject_unknown(j, {"alpha", "gamma", "alpha_mode"}, w);
  FocalLossParams c;
  read(j, "alpha", c.alpha, w);
  read(j, "gamma", c.gamma, w);
  if (j.contains("alpha_mode")) {
    const auto m = j.at("alpha_mode").get<std::string>();
    if (m == "balanced") c.alpha_mode = AlphaMode::kBalanced;
    else if (m == "constant") c.alpha_mode = AlphaMode::kConstant;
    else throw ConfigError("focal.alpha_mode: expected balanced|constant");
  }
  return c;
}

json to_json_value(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"patience_epochs", c.patience_epochs},
          {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
          {"seed", c.seed},                   {"loss", to_string(c.loss_kind)},
          {"focal", to_json_value(c.focal)},  {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"eps", c.eps},
          {"rectify", c.rectify},             {"bn_momentum", c.bn_momentum},
          {"time_budget_seconds", c.time_budget_seconds}, {"max_steps", c.max_steps}};
}

TrainConfig train_from_json(const json& j) {
  const std::string w = "train";
  reject_unknown(j, {"learning_rate", "patience_epochs", "batch_size", "max_epochs", "seed", "loss", "focal",
                     "beta1", "beta2", "eps", "rectify", "bn_momentum", "time_budget_seconds", "max_steps"}, w);
  TrainConfig c;
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "patience_epochs", c.patience_epochs, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "max_epochs", c.max_epochs, w);
  read(j, "seed", c.seed, w);
  if (j.contains("loss")) c.loss_kind = parse_loss_kind(j.at("loss").get<std::string>());
  if (j.contains("focal")) c.focal = focal_from_json(j.at("focal"));
  read(j, "beta1", c.beta1, w);
  read(j, "beta2", c.beta2, w);
  read(j, "eps", c.eps, w);
  read(j, "rectify", c.rectify, w);
  read(j, "bn_momentum", c.bn_momentum, w);
  read(j, "time_budget_seconds", c.time_budget_seconds, w);
  read(j, "max_steps", c.max_steps, w);
  return c;
}

json to_json_value(const RunConfig& c) {
  return {{"frontend", to_json_value(c.frontend)},
          {"model", to_json_value(c.model)},
          {"train", to_json_value(c.train)},
          {"eval", {{"threshold", c.eval.threshold}, {"segment_seconds", c.eval.segment_seconds}}},
          {"ablation",
           {{"no_pitch", c.ablation.no_pitch},
            {"single_resolution", c.ablation.single_resolution},
            {"no_se", c.ablation.no_se},
            {"batch_norm", c.ablation.batch_norm},
            {"kernels_3x3", c.ablation.kernels_3x3}}},
          {"folds", c.folds},
          {"fold_seed", c.fold_seed},
          {"clip_seconds", c.clip_seconds}};
}

RunConfig run_config_from_json(const json& j) {
  const std::string w = "config";
  reject_unknown(j, {"frontend", "model", "train", "eval", "ablation", "folds", "fold_seed", "clip_seconds"}, w);
  RunConfig c;
  if (j.contains("frontend")) c.frontend = frontend_from_json(j.at("frontend"));
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_from_json(j.at("train"));
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, {"threshold", "segment_seconds"}, "eval");
    read(e, "threshold", c.eval.threshold, "eval");
    read(e, "segment_seconds", c.eval.segment_seconds, "eval");
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    if (a.is_string()) {
      c.ablation = ablation_for(a.get<std::string>());
    } else {
      reject_unknown(a, {"no_pitch", "single_resolution", "no_se", "batch_norm", "kernels_3x3"}, "ablation");
      read(a, "no_pitch", c.ablation.no_pitch, "ablation");
      read(a, "single_resolution", c.ablation.single_resolution, "ablation");
      read(a, "no_se", c.ablation.no_se, "ablation");
      read(a, "batch_norm", c.ablation.batch_norm, "ablation");
      read(a, "kernels_3x3", c.ablation.kernels_3x3, "ablation");
    }
  }
  read(j, "folds", c.folds, w);
  read(j, "fold_seed", c.fold_seed, w);
  read(j, "clip_seconds", c.clip_seconds, w);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  c.validate();
  return c;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write config: " + path.string());
  f << to_json_value(cfg).dump(2) << '\n';
}

}  // namespace primadnn
