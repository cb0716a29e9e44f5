#include "primadnn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "primadnn/folds.hpp"

namespace primadnn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::string gradcheck_layer_name(ParamGroup group, const ModelConfig& config) {
  switch (group) {
    case ParamGroup::kConv: return "conv";
    case ParamGroup::kNorm: return config.norm == NormKind::kInstance ? "instance_norm" : "batch_norm";
    case ParamGroup::kSe: return "se";
    case ParamGroup::kLstm: return "bilstm";
    case ParamGroup::kOutput: return "affine";
  }
  return "unknown";
}

const GradcheckEntry& GradcheckReport::layer(const std::string& name) const {
  for (const auto& e : layers)
    if (e.name == name) return e;
  throw std::out_of_range("gradcheck report has no layer '" + name + "'");
}

std::string GradcheckReport::to_json() const {
  auto entry = [](const GradcheckEntry& e) {
    return nlohmann::ordered_json{{"name", e.name},
                                  {"checked", e.checked},
                                  {"max_rel_error", e.max_rel_error},
                                  {"max_abs_error", e.max_abs_error},
                                  {"passed", e.passed}};
  };
  nlohmann::ordered_json j;
  j["passed"] = passed;
  j["tolerance"] = tolerance;
  j["max_rel_error"] = max_rel_error;
  j["seconds"] = seconds;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& e : layers) j["layers"].push_back(entry(e));
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& e : blocks) j["blocks"].push_back(entry(e));
  return j.dump(2);
}

std::string GradcheckReport::to_text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %8s %14s %14s\n", "layer", "checked", "max_rel_err", "max_abs_err");
  out += line;
  for (const auto& e : layers) {
    std::snprintf(line, sizeof line, "%-28s %8d %14.3e %14.3e %s\n", e.name.c_str(), e.checked,
                  e.max_rel_error, e.max_abs_error, e.passed ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof line, "overall max relative error %.3e (tolerance %.0e) in %.2f s: %s\n",
                max_rel_error, tolerance, seconds, passed ? "PASS" : "FAIL");
  out += line;
  return out;
}

namespace {

void record(GradcheckEntry& e, double analytic, double numeric, double floor, double tol) {
  const double rel = relative_error(analytic, numeric, floor);
  e.max_rel_error = std::max(e.max_rel_error, rel);
  e.max_abs_error = std::max(e.max_abs_error, std::abs(analytic - numeric));
  ++e.checked;
  if (!(rel < tol)) e.passed = false;
}

std::vector<std::size_t> pick(std::size_t size, int samples, std::uint64_t seed) {
  std::vector<std::size_t> idx = seeded_permutation(size, seed);
  if (samples > 0 && idx.size() > static_cast<std::size_t>(samples)) idx.resize(static_cast<std::size_t>(samples));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  const auto started = std::chrono::steady_clock::now();
  opt.config.validate();
  if (opt.frames < 1 || opt.batch < 1) throw ConfigError("gradcheck needs at least one frame and instance");
  if (!(opt.step > 0.0)) throw ConfigError("gradcheck step must be positive");

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);

  ModelParams<double> params = init_params<double>(opt.config, opt.seed + 1);
  // Perturb the norm and bias parameters away from their symmetric init.
  for (const auto& s : params.layout.specs()) {
    if (s.group == ParamGroup::kNorm || s.name.ends_with("bias")) {
      for (std::size_t i = 0; i < s.size; ++i) params.values[s.offset + i] += 0.1 * gauss(rng);
    }
  }

  std::vector<Tensor3<double>> inputs;
  std::vector<LabelRoll> labels;
  for (int b = 0; b < opt.batch; ++b) {
    Tensor3<double> x(opt.config.in_channels, opt.config.n_mels, opt.frames);
    for (auto& v : x.data) v = gauss(rng);
    inputs.push_back(std::move(x));
    LabelRoll y(opt.config.n_classes, opt.frames);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = coin(rng) ? 1 : 0;
    labels.push_back(std::move(y));
  }
  std::vector<const Tensor3<double>*> ptrs;
  for (const auto& x : inputs) ptrs.push_back(&x);

  auto loss_of = [&](const ModelParams<double>& p) {
    const auto acts = forward_batch<double>(p, ptrs, Phase::kTrain);
    double total = 0.0;
    for (std::size_t b = 0; b < acts.size(); ++b) total += focal_loss(acts[b], labels[b], opt.focal);
    return total;
  };

  ForwardCache<double> cache;
  const auto acts = forward_batch<double>(params, ptrs, Phase::kTrain, &cache);
  std::vector<RowMatrix<double>> upstream(acts.size());
  for (std::size_t b = 0; b < acts.size(); ++b) focal_loss(acts[b], labels[b], opt.focal, &upstream[b]);
  AlignedVector<double> grads(params.values.size(), 0.0);
  backward_batch<double>(params, cache, upstream, grads);
  if (opt.tamper) opt.tamper(params.layout, grads);

  GradcheckReport report;
  report.tolerance = opt.tolerance;
  auto layer_entry = [&](const std::string& name) -> GradcheckEntry& {
    for (auto& e : report.layers)
      if (e.name == name) return e;
    report.layers.push_back({name});
    return report.layers.back();
  };

  const double h = opt.step;
  std::uint64_t block_seed = opt.seed;
  for (const auto& s : params.layout.specs()) {
    GradcheckEntry block{s.name};
    GradcheckEntry& layer = layer_entry(gradcheck_layer_name(s.group, opt.config));
    for (std::size_t k : pick(s.size, opt.samples_per_block, ++block_seed)) {
      const std::size_t i = s.offset + k;
      const double saved = params.values[i];
      params.values[i] = saved + h;
      const double up = loss_of(params);
      params.values[i] = saved - h;
      const double down = loss_of(params);
      params.values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      record(block, grads[i], numeric, opt.abs_floor, opt.tolerance);
      record(layer, grads[i], numeric, opt.abs_floor, opt.tolerance);
    }
    report.blocks.push_back(block);
  }

  // The loss itself, with respect to activations away from the clamp.
  {
    GradcheckEntry& e = layer_entry("focal_loss");
    std::uniform_real_distribution<double> unit(0.02, 0.98);
    RowMatrix<double> a(opt.config.n_classes, opt.frames);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = unit(rng);
    RowMatrix<double> g;
    focal_loss(a, labels[0], opt.focal, &g);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double saved = a.data()[i];
      a.data()[i] = saved + h;
      const double up = focal_loss(a, labels[0], opt.focal);
      a.data()[i] = saved - h;
      const double down = focal_loss(a, labels[0], opt.focal);
      a.data()[i] = saved;
      record(e, g.data()[i], (up - down) / (2.0 * h), opt.abs_floor, opt.tolerance);
    }
  }

  for (const auto& e : report.layers) {
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.passed = report.passed && e.passed;
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace primadnn
