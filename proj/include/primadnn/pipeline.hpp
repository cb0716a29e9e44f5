#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "primadnn/checkpoint.hpp"
#include "primadnn/corpus.hpp"
#include "primadnn/detection.hpp"
#include "primadnn/folds.hpp"
#include "primadnn/run_config.hpp"
#include "primadnn/trainer.hpp"

namespace primadnn {

/// Channel statistics of `channels` over the clips at `indices`.
ChannelStats split_channel_stats(const Dataset& ds, std::span<const std::size_t> indices,
                                 const std::vector<std::string>& channels);

/// Selects `channels`, standardizes them and pairs each input with its
/// frame-level label roll.
std::vector<TrainingExample> make_examples(const Dataset& ds, std::span<const std::size_t> indices,
                                           const std::vector<std::string>& channels,
                                           const ChannelStats& stats, int threads = 1);

/// Frame activations (classes x frames) for one raw feature stack.
ActivationRoll infer_activations(const Checkpoint& ckpt, const FeatureStack& raw);

struct ClipPrediction {
  std::string id;
  std::string singer_id;
  double duration_seconds = 0.0;
  ActivationRoll activations;
  EventList events;     // decoded and clipped to the clip duration
  EventList reference;
};

/// Threshold decoding of activations into events no later than `duration`.
EventList decode_events(const ActivationRoll& activations, double threshold, double duration_seconds,
                        double frame_seconds = kFrameSeconds);

std::vector<ClipPrediction> predict_clips(const Checkpoint& ckpt, const Dataset& ds,
                                          std::span<const std::size_t> indices, double threshold,
                                          int threads = 1);

/// Per-clip segment metrics summed over all clips.
SegmentMetrics evaluate_predictions(std::span<const ClipPrediction> predictions, double segment_seconds);

struct FoldRunResult {
  FoldSplit split;
  Checkpoint checkpoint;
  TrainResult training;
  std::vector<ClipPrediction> test_predictions;
  SegmentMetrics test_metrics;
  double seconds = 0.0;
};

/// Trains on the fold's training singers, early-stops on its validation
/// singers and evaluates on its test singers.
FoldRunResult run_fold(const RunConfig& cfg, const Dataset& ds, const FoldPlan& plan, int fold,
                       std::ostream* log = nullptr, int threads = 1,
                       const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Activation CSV: header "time,<labels...>", one row per frame.
void save_activations(const std::filesystem::path& path, const ActivationRoll& act,
                      double frame_seconds = kFrameSeconds);
ActivationRoll load_activations(const std::filesystem::path& path);

/// Timeline rows (time, class, reference, activation, detection) for every
/// frame and class.
std::string viz_timeline_csv(const ClipPrediction& p, double threshold, double frame_seconds = kFrameSeconds);

struct AblationRow {
  std::string condition;
  bool ok = false;
  std::string error;
  std::vector<std::string> channels;
  FoldSplit split;
  SegmentMetrics metrics;
  int epochs = 0;
  double seconds = 0.0;
};

struct AblationReport {
  int fold = 0;
  std::vector<AblationRow> rows;

  /// Macro-F, Micro-F, P, R per condition (percent), failed rows marked.
  std::string table() const;
  /// condition,<label F columns...> in percent.
  std::string class_csv() const;
  std::string to_json() const;
};

/// Trains and evaluates each condition on the same fold of the same plan.
/// A failing condition yields a marked row instead of aborting the suite.
AblationReport run_ablation_suite(const RunConfig& base, const Dataset& ds, const FoldPlan& plan, int fold,
                                  int threads = 1,
                                  const std::vector<std::string>& conditions = ablation_conditions(),
                                  const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace primadnn
