#include "primadnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "primadnn/folds.hpp"
#include "primadnn/synth.hpp"

namespace primadnn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (patience_epochs < 1) throw ConfigError("patience_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optimizer betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer eps must be positive");
  if (!(focal.alpha >= 0.0 && focal.alpha <= 1.0)) throw ConfigError("focal alpha must lie in [0, 1]");
  if (!(focal.gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must lie in (0, 1]");
  if (time_budget_seconds < 0.0) throw ConfigError("time_budget_seconds must be >= 0");
}

std::string to_string(LossKind kind) { return kind == LossKind::kFocal ? "focal" : "bce"; }

LossKind parse_loss_kind(const std::string& s) {
  if (s == "focal") return LossKind::kFocal;
  if (s == "bce") return LossKind::kBce;
  throw ConfigError("unknown loss '" + s + "' (expected focal|bce)");
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(int epoch, double val_loss) {
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    epochs_since_best_ = 0;
    return true;
  }
  ++epochs_since_best_;
  return false;
}

std::string epoch_record_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  j["best_so_far"] = r.best_val_loss;
  j["improved"] = r.improved;
  j["wall_ms"] = std::llround(r.wall_ms);
  return j.dump();
}

namespace {

double cells_of(const TrainingExample& e) { return static_cast<double>(e.labels.size()); }

void check_examples(std::span<const TrainingExample> xs, const ModelConfig& cfg, const char* split) {
  if (xs.empty()) throw std::invalid_argument(std::string(split) + " split is empty");
  for (const auto& x : xs) {
    if (x.labels.rows() != cfg.n_classes || x.labels.cols() != x.input.cols)
      throw std::invalid_argument(std::string(split) + " example labels do not match its input");
    // ReLU and max-pool would silently turn a NaN feature into zeros.
    for (float v : x.input.data)
      if (!std::isfinite(v)) throw std::runtime_error(std::string(split) + " example has a non-finite feature");
  }
}

}  // namespace

double evaluate_loss(const ModelParams<float>& params, std::span<const TrainingExample> examples,
                     const TrainConfig& cfg) {
  double total = 0.0;
  double cells = 0.0;
  for (const auto& ex : examples) {
    const Tensor3<float>* in[] = {&ex.input};
    const auto act = forward_batch<float>(params, in, Phase::kInference);
    total += compute_loss(cfg.loss_kind, act[0], ex.labels, cfg.focal) * cells_of(ex);
    cells += cells_of(ex);
  }
  return cells > 0.0 ? total / cells : 0.0;
}

TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& cfg,
                        std::span<const TrainingExample> train,
                        std::span<const TrainingExample> validation, std::ostream* log,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  model_cfg.validate();
  cfg.validate();
  check_examples(train, model_cfg, "training");
  check_examples(validation, model_cfg, "validation");

  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  auto elapsed_s = [&] { return std::chrono::duration<double>(Clock::now() - started).count(); };

  ModelParams<float> params = init_params<float>(model_cfg, cfg.seed);
  TrainResult result;
  result.best = params;
  RAdamState opt;
  const RAdamConfig opt_cfg = cfg.optimizer();
  EarlyStopping stopper(cfg.patience_epochs);
  AlignedVector<float> grads(params.values.size());
  long steps = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const auto order = seeded_permutation(train.size(), derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double epoch_loss = 0.0;
    double epoch_cells = 0.0;
    bool step_cap = false;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Tensor3<float>*> inputs;
      double batch_cells = 0.0;
      for (std::size_t k = b0; k < b1; ++k) {
        inputs.push_back(&train[order[k]].input);
        batch_cells += cells_of(train[order[k]]);
      }
      ForwardCache<float> cache;
      const auto acts = forward_batch<float>(params, inputs, Phase::kTrain, &cache);
      std::vector<RowMatrix<float>> upstream(acts.size());
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < acts.size(); ++k) {
        const auto& ex = train[order[b0 + k]];
        const double w = cells_of(ex) / batch_cells;
        batch_loss += w * compute_loss(cfg.loss_kind, acts[k], ex.labels, cfg.focal, &upstream[k], w);
      }
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(steps + 1));
      }
      std::fill(grads.begin(), grads.end(), 0.0f);
      backward_batch<float>(params, cache, upstream, grads);
      radam_step<float>(params.values, grads, opt, opt_cfg);
      update_running_stats<float>(params, cache, static_cast<float>(cfg.bn_momentum));
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * batch_cells;
      epoch_cells += batch_cells;
      ++steps;
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) {
        step_cap = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / epoch_cells;
    rec.val_loss = evaluate_loss(params, validation, cfg);
    if (!std::isfinite(rec.val_loss))
      throw std::runtime_error("non-finite validation loss at epoch " + std::to_string(epoch));
    rec.improved = stopper.update(epoch, rec.val_loss);
    if (rec.improved) {
      result.best = params;
      result.best_epoch = epoch;
    }
    rec.best_val_loss = stopper.best_loss();
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - epoch_start).count();
    result.epochs.push_back(rec);
    if (log) *log << epoch_record_json(rec) << '\n' << std::flush;
    if (on_epoch) on_epoch(rec);

    if (stopper.should_stop()) {
      result.stop_reason = "patience";
      break;
    }
    if (step_cap) {
      result.stop_reason = "max_steps";
      break;
    }
    if (cfg.time_budget_seconds > 0.0) {
      // Leave room for one more epoch of the same length.
      const double per_epoch = elapsed_s() / epoch;
      if (elapsed_s() + per_epoch > cfg.time_budget_seconds) {
        result.stop_reason = "time_budget";
        break;
      }
    }
    if (epoch == cfg.max_epochs) result.stop_reason = "max_epochs";
  }
  return result;
}

}  // namespace primadnn
