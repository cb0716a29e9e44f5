#include "primadnn/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "primadnn/parallel.hpp"

namespace primadnn {

ChannelStats split_channel_stats(const Dataset& ds, std::span<const std::size_t> indices,
                                 const std::vector<std::string>& channels) {
  std::vector<const FeatureStack*> stacks;
  for (std::size_t i : indices) stacks.push_back(&ds.clips.at(i).features);
  ChannelStats all = compute_channel_stats(std::span<const FeatureStack* const>(stacks));
  ChannelStats out;
  for (const auto& name : channels) {
    const auto it = std::find(all.names.begin(), all.names.end(), name);
    if (it == all.names.end()) throw std::invalid_argument("dataset has no feature channel '" + name + "'");
    const auto k = static_cast<std::size_t>(it - all.names.begin());
    out.names.push_back(name);
    out.mean.push_back(all.mean[k]);
    out.std.push_back(all.std[k]);
  }
  return out;
}

std::vector<TrainingExample> make_examples(const Dataset& ds, std::span<const std::size_t> indices,
                                           const std::vector<std::string>& channels,
                                           const ChannelStats& stats, int threads) {
  std::vector<TrainingExample> out(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    const DatasetClip& clip = ds.clips.at(indices[k]);
    FeatureStack s = select_channels(clip.features, channels);
    standardize_in_place(s, stats);
    out[k].input = to_tensor<float>(s);
    out[k].labels = events_to_roll(clip.events, s.n_frames);
  });
  return out;
}

ActivationRoll infer_activations(const Checkpoint& ckpt, const FeatureStack& raw) {
  FeatureStack s = select_channels(raw, ckpt.channels);
  standardize_in_place(s, ckpt.stats);
  const Tensor3<float> x = to_tensor<float>(s);
  const Tensor3<float>* in[] = {&x};
  const auto act = forward_batch<float>(ckpt.params, in, Phase::kInference);
  return act[0].cast<double>();
}

EventList decode_events(const ActivationRoll& activations, double threshold, double duration_seconds,
                        double frame_seconds) {
  EventList out;
  for (Event e : roll_to_events(binarize(activations, threshold), frame_seconds)) {
    if (e.onset >= duration_seconds) continue;
    e.offset = std::min(e.offset, duration_seconds);
    out.push_back(e);
  }
  return out;
}

std::vector<ClipPrediction> predict_clips(const Checkpoint& ckpt, const Dataset& ds,
                                          std::span<const std::size_t> indices, double threshold,
                                          int threads) {
  std::vector<ClipPrediction> out(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t k) {
    const DatasetClip& clip = ds.clips.at(indices[k]);
    ClipPrediction& p = out[k];
    p.id = clip.id;
    p.singer_id = clip.singer_id;
    p.duration_seconds = clip.duration_seconds;
    p.activations = infer_activations(ckpt, clip.features);
    p.events = decode_events(p.activations, threshold, clip.duration_seconds);
    p.reference = clip.events;
  });
  return out;
}

SegmentMetrics evaluate_predictions(std::span<const ClipPrediction> predictions, double segment_seconds) {
  SegmentMetrics total;
  total.segment_seconds = segment_seconds;
  for (const auto& p : predictions)
    total += segment_metrics(p.reference, p.events, p.duration_seconds, segment_seconds);
  return total;
}

FoldRunResult run_fold(const RunConfig& cfg, const Dataset& ds, const FoldPlan& plan, int fold,
                       std::ostream* log, int threads,
                       const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  FoldRunResult r;
  r.split = plan.split(fold);
  const auto train_idx = ds.indices_for(r.split.train);
  const auto val_idx = ds.indices_for(r.split.validation);
  const auto test_idx = ds.indices_for(r.split.test);
  if (train_idx.empty() || val_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold) + " has an empty training or validation split");

  const auto channels = cfg.feature_channels();
  const ModelConfig model = cfg.effective_model();
  const ChannelStats stats = split_channel_stats(ds, train_idx, channels);
  {
    const auto train = make_examples(ds, train_idx, channels, stats, threads);
    const auto val = make_examples(ds, val_idx, channels, stats, threads);
    r.training = train_model(model, cfg.train, train, val, log, on_epoch);
  }
  r.checkpoint.params = r.training.best;
  r.checkpoint.stats = stats;
  r.checkpoint.channels = channels;
  r.checkpoint.loss = cfg.train.loss_kind;
  r.checkpoint.focal = cfg.train.focal;
  r.checkpoint.run_config = to_json_value(cfg);
  r.test_predictions = predict_clips(r.checkpoint, ds, test_idx, cfg.eval.threshold, threads);
  r.test_metrics = evaluate_predictions(r.test_predictions, cfg.eval.segment_seconds);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

void save_activations(const std::filesystem::path& path, const ActivationRoll& act, double frame_seconds) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write activations: " + path.string());
  f << "time";
  for (auto l : kAllLabels) f << ',' << label_name(l);
  f << '\n';
  char buf[32];
  for (Eigen::Index t = 0; t < act.cols(); ++t) {
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(t) * frame_seconds);
    f << buf;
    for (Eigen::Index c = 0; c < act.rows(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", act(c, t));
      f << ',' << buf;
    }
    f << '\n';
  }
  if (!f) throw InputError("failed writing activations: " + path.string());
}

ActivationRoll load_activations(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open activations: " + path.string());
  std::string line;
  std::getline(f, line);
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    std::getline(ss, cell, ',');  // time
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    if (row.size() != static_cast<std::size_t>(kNumClasses))
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected 9 activation columns");
    rows.push_back(std::move(row));
  }
  ActivationRoll act(kNumClasses, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (int c = 0; c < kNumClasses; ++c) act(c, static_cast<Eigen::Index>(t)) = rows[t][static_cast<std::size_t>(c)];
  return act;
}

std::string viz_timeline_csv(const ClipPrediction& p, double threshold, double frame_seconds) {
  const Roll ref = events_to_roll(p.reference, static_cast<int>(p.activations.cols()), frame_seconds);
  std::string out = "time,class,reference,activation,detection\n";
  char buf[128];
  for (Eigen::Index t = 0; t < p.activations.cols(); ++t) {
    for (int c = 0; c < kNumClasses; ++c) {
      const double a = p.activations(c, t);
      std::snprintf(buf, sizeof buf, "%.2f,%s,%d,%.6f,%d\n", static_cast<double>(t) * frame_seconds,
                    std::string(label_name(label_from_index(c))).c_str(), ref(c, t) ? 1 : 0, a,
                    a >= threshold ? 1 : 0);
      out += buf;
    }
  }
  return out;
}

std::string AblationReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %8s\n", "", "Macro-F", "Micro-F", "P", "R");
  out += line;
  for (const auto& r : rows) {
    const std::string name = condition_display_name(r.condition);
    if (!r.ok) {
      std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %8s  (%s)\n", name.c_str(), "FAILED", "-", "-", "-",
                    r.error.c_str());
    } else {
      const Scores micro = r.metrics.micro();
      std::snprintf(line, sizeof line, "%-20s %7.1f%% %7.1f%% %7.1f%% %7.1f%%\n", name.c_str(),
                    100 * r.metrics.macro_f(), 100 * micro.f, 100 * micro.precision, 100 * micro.recall);
    }
    out += line;
  }
  return out;
}

std::string AblationReport::class_csv() const {
  std::string out = "condition";
  for (auto l : kAllLabels) out += "," + std::string(label_name(l));
  out += "\n";
  char buf[32];
  for (const auto& r : rows) {
    out += r.condition;
    for (int c = 0; c < kNumClasses; ++c) {
      if (r.ok) {
        std::snprintf(buf, sizeof buf, ",%.2f", 100 * r.metrics.class_scores(c).f);
        out += buf;
      } else {
        out += ",nan";
      }
    }
    out += "\n";
  }
  return out;
}

std::string AblationReport::to_json() const {
  nlohmann::ordered_json j;
  j["fold"] = fold;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["condition"] = r.condition;
    row["ok"] = r.ok;
    if (!r.ok) row["error"] = r.error;
    row["channels"] = r.channels;
    row["train_singers"] = r.split.train;
    row["validation_singers"] = r.split.validation;
    row["test_singers"] = r.split.test;
    row["epochs"] = r.epochs;
    row["seconds"] = r.seconds;
    if (r.ok) row["metrics"] = nlohmann::ordered_json::parse(metrics_to_json(r.metrics));
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

AblationReport run_ablation_suite(const RunConfig& base, const Dataset& ds, const FoldPlan& plan, int fold,
                                  int threads, const std::vector<std::string>& conditions,
                                  const std::function<void(const AblationRow&)>& on_row) {
  AblationReport report;
  report.fold = fold;
  for (const auto& condition : conditions) {
    AblationRow row;
    row.condition = condition;
    row.split = plan.split(fold);
    const auto started = std::chrono::steady_clock::now();
    try {
      RunConfig cfg = base;
      cfg.ablation = ablation_for(condition);
      row.channels = cfg.feature_channels();
      const FoldRunResult r = run_fold(cfg, ds, plan, fold, nullptr, threads);
      row.metrics = r.test_metrics;
      row.epochs = static_cast<int>(r.training.epochs.size());
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (on_row) on_row(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace primadnn
