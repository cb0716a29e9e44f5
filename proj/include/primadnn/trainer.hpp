#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "primadnn/events.hpp"
#include "primadnn/loss.hpp"
#include "primadnn/model.hpp"
#include "primadnn/radam.hpp"

namespace primadnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  int patience_epochs = 20;
  int batch_size = 16;
  int max_epochs = 200;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kFocal;
  FocalLossParams focal;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool rectify = true;
  double bn_momentum = 0.1;
  /// Wall-clock cap on the epoch loop; 0 disables it.
  double time_budget_seconds = 0.0;
  /// Stop after this many optimizer steps; 0 disables it.
  long max_steps = 0;

  void validate() const;
  RAdamConfig optimizer() const { return {learning_rate, beta1, beta2, eps, rectify}; }
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

/// Stops once the validation loss has not strictly improved for `patience`
/// consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  /// Records the loss of `epoch`; true when it is a new best.
  bool update(int epoch, double val_loss);
  bool should_stop() const { return epochs_since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  int epochs_since_best_ = 0;
  double best_loss_;
};

struct TrainingExample {
  Tensor3<float> input;
  LabelRoll labels;  // n_classes x frames
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  bool improved = false;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelParams<float> best;
  int best_epoch = 0;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::string stop_reason;
};

std::string epoch_record_json(const EpochRecord& r);

/// Cell-weighted mean loss over `examples` in inference mode.
double evaluate_loss(const ModelParams<float>& params, std::span<const TrainingExample> examples,
                     const TrainConfig& cfg);

/// Mini-batch training with per-epoch seeded shuffling, validation after
/// every epoch and best-validation parameter retention. Each epoch appends
/// one JSON line to `log` when given. Throws std::runtime_error on a
/// non-finite loss and std::invalid_argument on an empty split.
TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& cfg,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation, std::ostream* log = nullptr,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace primadnn
