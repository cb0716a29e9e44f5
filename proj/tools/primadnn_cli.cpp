// primadnn command-line driver.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "primadnn/annotations.hpp"
#include "primadnn/checkpoint.hpp"
#include "primadnn/corpus.hpp"
#include "primadnn/detection.hpp"
#include "primadnn/feature_io.hpp"
#include "primadnn/gradcheck.hpp"
#include "primadnn/parallel.hpp"
#include "primadnn/pipeline.hpp"
#include "primadnn/run_config.hpp"
#include "primadnn/synth.hpp"

namespace fs = std::filesystem;
using namespace primadnn;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int fold = 0;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c, bool with_fold = true) {
  app->add_option("--config", c.config, "Run configuration (JSON)");
  app->add_option("--seed", c.seed, "Seed for training and the fold plan");
  if (with_fold) app->add_option("--fold", c.fold, "Fold index")->check(CLI::NonNegativeNumber);
  app->add_option("--threads", c.threads, "Worker threads (default: PRIMADNN_THREADS or 1)");
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.fold_seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw InputError("no such file: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("failed writing " + path.string());
}

Dataset dataset_for(const std::string& manifest_path, const RunConfig& cfg, int threads,
                    const std::string& features_dir) {
  require_file(manifest_path);
  const CorpusManifest manifest = load_manifest(manifest_path);
  DatasetOptions opt;
  opt.frontend = cfg.frontend;
  opt.clip_seconds = cfg.clip_seconds;
  opt.threads = threads;
  opt.cache_dir = features_dir.empty() ? manifest.root / "features" : fs::path(features_dir);
  return load_dataset(manifest, opt);
}

FoldPlan plan_for(const Dataset& ds, const RunConfig& cfg) {
  return make_fold_plan(ds.singers(), cfg.folds, cfg.fold_seed);
}

std::string stem_of(const std::string& id) {
  std::string s = id;
  for (char& ch : s)
    if (ch == '#' || ch == '/') ch = '_';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singing-technique detection toolkit"};
  app.require_subcommand(1);

  // synth
  Common synth_c;
  int n_clips = 200, n_singers = 14;
  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic technique corpus");
  synth->add_option("--out", synth_c.out, "Output directory")->required();
  synth->add_option("--clips", n_clips, "Number of 10 s clips")->check(CLI::PositiveNumber);
  synth->add_option("--singers", n_singers, "Number of pseudo-singers")->check(CLI::PositiveNumber);
  synth->add_option("--spec", spec_path, "Motif parameters (JSON)");
  synth->add_option("--seed", synth_c.seed, "Corpus seed");
  synth->add_option("--threads", synth_c.threads, "Worker threads");

  // extract
  Common extract_c;
  std::string manifest_path;
  auto* extract = app.add_subcommand("extract", "Compute feature files for every clip of a corpus");
  add_common(extract, extract_c, false);
  extract->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  extract->add_option("--out", extract_c.out, "Feature directory")->required();

  // train
  Common train_c;
  std::string features_dir;
  auto* train = app.add_subcommand("train", "Train one fold and evaluate on its test singers");
  add_common(train, train_c);
  train->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  train->add_option("--out", train_c.out, "Output directory")->required();
  train->add_option("--features", features_dir, "Feature cache directory");

  // infer
  Common infer_c;
  std::string checkpoint_path;
  bool all_clips = false;
  auto* infer = app.add_subcommand("infer", "Write activations and detections for a fold's test clips");
  add_common(infer, infer_c);
  infer->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  infer->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  infer->add_option("--out", infer_c.out, "Output directory")->required();
  infer->add_option("--features", features_dir, "Feature cache directory");
  infer->add_flag("--all", all_clips, "Process every clip instead of the fold's test singers");

  // eval
  std::string ref_path, pred_path, predictions_path, eval_json;
  double duration = 0.0, segment = kSegmentSeconds;
  auto* eval = app.add_subcommand("eval", "Segment-based metrics");
  eval->add_option("--ref", ref_path, "Reference annotation CSV");
  eval->add_option("--pred", pred_path, "Predicted annotation CSV");
  eval->add_option("--duration", duration, "Clip duration in seconds");
  eval->add_option("--predictions", predictions_path, "predictions.json written by infer");
  eval->add_option("--segment", segment, "Segment length in seconds")->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_json, "Write the metrics JSON here");

  // gradcheck
  Common grad_c;
  bool grad_json = false;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check on the tiny model");
  grad->add_option("--seed", grad_c.seed, "Seed for inputs and parameters");
  grad->add_option("--out", grad_c.out, "Write the JSON report here");
  grad->add_flag("--json", grad_json, "Print the JSON report instead of the table");

  // viz
  Common viz_c;
  std::string clip_id;
  auto* viz = app.add_subcommand("viz", "Per-frame timeline CSV of one clip");
  add_common(viz, viz_c, false);
  viz->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  viz->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  viz->add_option("--clip", clip_id, "Clip id")->required();
  viz->add_option("--out", viz_c.out, "Output CSV")->required();
  viz->add_option("--features", features_dir, "Feature cache directory");

  // ablation
  Common abl_c;
  std::vector<std::string> conditions = ablation_conditions();
  auto* ablation = app.add_subcommand("ablation", "Train and compare the ablation conditions on one fold");
  add_common(ablation, abl_c);
  ablation->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  ablation->add_option("--out", abl_c.out, "Output directory")->required();
  ablation->add_option("--features", features_dir, "Feature cache directory");
  ablation->add_option("--conditions", conditions, "Subset of conditions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SynthSpec spec;
      if (!spec_path.empty()) {
        require_file(spec_path);
        std::ifstream f(spec_path);
        spec = nlohmann::json::parse(f).get<SynthSpec>();
      }
      const auto m = synth_corpus(spec, n_clips, n_singers, synth_c.seed.value_or(0), synth_c.out,
                                  resolve_threads(synth_c.threads));
      std::printf("wrote %zu clips from %zu singers to %s\n", m.clips.size(), m.singers().size(),
                  synth_c.out.c_str());
    } else if (*extract) {
      const RunConfig cfg = load_config(extract_c);
      const Dataset ds = dataset_for(manifest_path, cfg, resolve_threads(extract_c.threads), extract_c.out);
      std::printf("features for %zu clips in %s\n", ds.clips.size(), extract_c.out.c_str());
    } else if (*train) {
      const RunConfig cfg = load_config(train_c);
      const int threads = resolve_threads(train_c.threads);
      const Dataset ds = dataset_for(manifest_path, cfg, threads, features_dir);
      const FoldPlan plan = plan_for(ds, cfg);
      if (train_c.fold >= plan.folds()) throw ConfigError("fold index out of range");
      const fs::path out = train_c.out;
      fs::create_directories(out);
      std::ofstream log(out / "train_log.jsonl");
      const FoldRunResult r = run_fold(cfg, ds, plan, train_c.fold, &log, threads, [](const EpochRecord& e) {
        std::fprintf(stderr, "epoch %d train %.5f val %.5f%s\n", e.epoch, e.train_loss, e.val_loss,
                     e.improved ? " *" : "");
      });
      save_checkpoint(out / "checkpoint.pdnc", r.checkpoint);
      save_run_config(out / "config.json", cfg);
      write_text(out / "test_metrics.json", metrics_to_json(r.test_metrics) + "\n");
      nlohmann::ordered_json split{{"fold", train_c.fold},
                                   {"train", r.split.train},
                                   {"validation", r.split.validation},
                                   {"test", r.split.test},
                                   {"best_epoch", r.training.best_epoch},
                                   {"stop_reason", r.training.stop_reason}};
      write_text(out / "fold.json", split.dump(2) + "\n");
      std::cout << metrics_to_table(r.test_metrics);
    } else if (*infer) {
      require_file(checkpoint_path);
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      RunConfig cfg = infer_c.config.empty() ? run_config_from_json(ckpt.run_config) : load_config(infer_c);
      if (infer_c.seed) cfg.fold_seed = *infer_c.seed;
      const int threads = resolve_threads(infer_c.threads);
      const Dataset ds = dataset_for(manifest_path, cfg, threads, features_dir);
      std::vector<std::size_t> idx;
      if (all_clips) {
        for (std::size_t i = 0; i < ds.clips.size(); ++i) idx.push_back(i);
      } else {
        const FoldPlan plan = plan_for(ds, cfg);
        if (infer_c.fold >= plan.folds()) throw ConfigError("fold index out of range");
        idx = ds.indices_for(plan.split(infer_c.fold).test);
      }
      const auto preds = predict_clips(ckpt, ds, idx, cfg.eval.threshold, threads);
      const fs::path out = infer_c.out;
      fs::create_directories(out);
      nlohmann::ordered_json listing;
      listing["segment_seconds"] = cfg.eval.segment_seconds;
      listing["clips"] = nlohmann::ordered_json::array();
      for (const auto& p : preds) {
        const std::string stem = stem_of(p.id);
        save_activations(out / (stem + ".act.csv"), p.activations);
        save_annotations(out / (stem + ".det.csv"), p.events);
        save_annotations(out / (stem + ".ref.csv"), p.reference);
        listing["clips"].push_back({{"id", p.id},
                                    {"singer_id", p.singer_id},
                                    {"duration", p.duration_seconds},
                                    {"reference", stem + ".ref.csv"},
                                    {"prediction", stem + ".det.csv"},
                                    {"activations", stem + ".act.csv"}});
      }
      write_text(out / "predictions.json", listing.dump(2) + "\n");
      std::printf("wrote predictions for %zu clips to %s\n", preds.size(), infer_c.out.c_str());
    } else if (*eval) {
      SegmentMetrics m;
      if (!predictions_path.empty()) {
        require_file(predictions_path);
        std::ifstream f(predictions_path);
        const auto listing = nlohmann::json::parse(f);
        const fs::path root = fs::path(predictions_path).parent_path();
        if (eval->count("--segment") == 0) segment = listing.value("segment_seconds", kSegmentSeconds);
        m.segment_seconds = segment;
        for (const auto& c : listing.at("clips")) {
          const auto ref = load_annotations(root / c.at("reference").get<std::string>());
          const auto pred = load_annotations(root / c.at("prediction").get<std::string>());
          m += segment_metrics(ref, pred, c.at("duration").get<double>(), segment);
        }
      } else {
        if (ref_path.empty() || pred_path.empty() || !(duration > 0.0)) {
          std::cerr << "eval needs --ref, --pred and --duration, or --predictions\n" << eval->help();
          return 2;
        }
        require_file(ref_path);
        require_file(pred_path);
        m = segment_metrics(load_annotations(ref_path), load_annotations(pred_path), duration, segment);
      }
      std::cout << metrics_to_table(m);
      if (!eval_json.empty()) write_text(eval_json, metrics_to_json(m) + "\n");
    } else if (*grad) {
      GradcheckOptions opt;
      opt.seed = grad_c.seed.value_or(0);
      const GradcheckReport r = run_gradcheck(opt);
      std::cout << (grad_json ? r.to_json() + "\n" : r.to_text());
      if (!grad_c.out.empty()) write_text(grad_c.out, r.to_json() + "\n");
      return r.passed ? 0 : 1;
    } else if (*viz) {
      require_file(checkpoint_path);
      const Checkpoint ckpt = load_checkpoint(checkpoint_path);
      const RunConfig cfg = viz_c.config.empty() ? run_config_from_json(ckpt.run_config) : load_config(viz_c);
      const Dataset ds = dataset_for(manifest_path, cfg, resolve_threads(viz_c.threads), features_dir);
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ds.clips.size(); ++i)
        if (ds.clips[i].id == clip_id) idx.push_back(i);
      if (idx.empty()) throw InputError("no clip with id '" + clip_id + "' in " + manifest_path);
      const auto preds = predict_clips(ckpt, ds, idx, cfg.eval.threshold, 1);
      write_text(viz_c.out, viz_timeline_csv(preds.front(), cfg.eval.threshold));
      std::printf("wrote %s\n", viz_c.out.c_str());
    } else if (*ablation) {
      const RunConfig cfg = load_config(abl_c);
      const int threads = resolve_threads(abl_c.threads);
      const Dataset ds = dataset_for(manifest_path, cfg, threads, features_dir);
      const FoldPlan plan = plan_for(ds, cfg);
      if (abl_c.fold >= plan.folds()) throw ConfigError("fold index out of range");
      const AblationReport report =
          run_ablation_suite(cfg, ds, plan, abl_c.fold, threads, conditions, [](const AblationRow& r) {
            std::fprintf(stderr, "%s: %s (%.0f s)\n", r.condition.c_str(), r.ok ? "done" : r.error.c_str(), r.seconds);
          });
      const fs::path out = abl_c.out;
      write_text(out / "ablation_table.txt", report.table());
      write_text(out / "ablation_class_f.csv", report.class_csv());
      write_text(out / "ablation.json", report.to_json() + "\n");
      std::cout << report.table();
      for (const auto& r : report.rows)
        if (!r.ok) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
