#include "primadnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace primadnn {

std::string to_string(NormKind kind) { return kind == NormKind::kInstance ? "instance" : "batch"; }

NormKind parse_norm_kind(const std::string& s) {
  if (s == "instance") return NormKind::kInstance;
  if (s == "batch") return NormKind::kBatch;
  throw ConfigError("unknown norm kind '" + s + "' (expected instance|batch)");
}

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kConv: return "conv";
    case ParamGroup::kNorm: return "norm";
    case ParamGroup::kSe: return "se";
    case ParamGroup::kLstm: return "lstm";
    case ParamGroup::kOutput: return "output";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be positive");
  if (conv_channels.empty()) throw ConfigError("at least one conv stage is required");
  if (kernel_sizes.size() != conv_channels.size() || freq_pool.size() != conv_channels.size()) {
    throw ConfigError("conv_channels, kernel_sizes and freq_pool must have equal length");
  }
  int rows = n_mels;
  for (std::size_t s = 0; s < conv_channels.size(); ++s) {
    if (conv_channels[s] < 1) throw ConfigError("conv channel counts must be positive");
    const auto [kr, kc] = kernel_sizes[s];
    if (kr < 1 || kc < 1 || kr % 2 == 0 || kc % 2 == 0) {
      throw ConfigError("kernel sizes must be odd and positive");
    }
    if (freq_pool[s] < 1 || rows % freq_pool[s] != 0) {
      throw ConfigError("frequency pool " + std::to_string(freq_pool[s]) + " at stage " +
                        std::to_string(s) + " does not divide " + std::to_string(rows) + " bins");
    }
    rows /= freq_pool[s];
    if (se_enabled && (se_ratio < 1 || conv_channels[s] % se_ratio != 0)) {
      throw ConfigError("SE ratio " + std::to_string(se_ratio) + " does not divide " +
                        std::to_string(conv_channels[s]) + " channels");
    }
  }
  if (rows != 1) {
    throw ConfigError("product of freq_pool must equal n_mels (frequency axis must collapse to 1)");
  }
  if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be positive");
  if (n_classes != 9) throw ConfigError("n_classes must be 9");
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
  if (!(output_prior >= 0.0 && output_prior < 1.0)) throw ConfigError("output_prior must lie in [0, 1)");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.in_channels = 4;
  c.n_mels = 8;
  c.conv_channels = {2, 2, 2, 2};
  c.freq_pool = {2, 2, 2, 1};
  c.lstm_hidden = 4;
  return c;
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  int in = config.in_channels;
  for (int s = 0; s < config.stages(); ++s) {
    const int out = config.conv_channels[static_cast<std::size_t>(s)];
    const auto [kr, kc] = config.kernel_sizes[static_cast<std::size_t>(s)];
    const std::string p = "stage" + std::to_string(s) + ".";
    add(p + "conv.weight", {out, in, kr, kc}, ParamGroup::kConv, in * kr * kc);
    add(p + "conv.bias", {out}, ParamGroup::kConv, in * kr * kc);
    add(p + "norm.scale", {out}, ParamGroup::kNorm, 1);
    add(p + "norm.shift", {out}, ParamGroup::kNorm, 1);
    if (config.se_enabled) {
      const int red = out / config.se_ratio;
      add(p + "se.fc1.weight", {red, out}, ParamGroup::kSe, out);
      add(p + "se.fc1.bias", {red}, ParamGroup::kSe, out);
      add(p + "se.fc2.weight", {out, red}, ParamGroup::kSe, red);
      add(p + "se.fc2.bias", {out}, ParamGroup::kSe, red);
    }
    running_offsets_.push_back(running_total_);
    if (config.norm == NormKind::kBatch) running_total_ += 2 * static_cast<std::size_t>(out);
    in = out;
  }
  const int h = config.lstm_hidden, d = config.lstm_input();
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string p = std::string("lstm.") + dir + ".";
    add(p + "w_ih", {4 * h, d}, ParamGroup::kLstm, h);
    add(p + "w_hh", {4 * h, h}, ParamGroup::kLstm, h);
    add(p + "bias", {4 * h}, ParamGroup::kLstm, h);
  }
  add("output.weight", {config.n_classes, 2 * h}, ParamGroup::kOutput, 2 * h);
  add("output.bias", {config.n_classes}, ParamGroup::kOutput, 2 * h);
}

void ParamLayout::add(std::string name, std::vector<int> shape, ParamGroup group, int fan_in) {
  ParamSpec s;
  s.name = std::move(name);
  s.size = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  s.shape = std::move(shape);
  s.offset = total_;
  s.group = group;
  s.fan_in = fan_in;
  total_ += s.size;
  specs_.push_back(std::move(s));
}

const ParamSpec& ParamLayout::spec(const std::string& name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no parameter block named '" + name + "'");
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<T> p;
  p.config = config;
  p.layout = ParamLayout(config);
  p.values.assign(p.layout.total(), T(0));
  p.running.assign(p.layout.running_total(), T(0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& s : p.layout.specs()) {
    T* v = p.values.data() + s.offset;
    const bool is_norm = s.group == ParamGroup::kNorm;
    if (is_norm) {
      const T fill = s.name.ends_with(".scale") ? T(1) : T(0);
      std::fill(v, v + s.size, fill);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    for (std::size_t i = 0; i < s.size; ++i) v[i] = static_cast<T>(bound * unit(rng));
    if (s.group == ParamGroup::kLstm && s.name.ends_with(".bias")) {
      const int h = config.lstm_hidden;
      std::fill(v + h, v + 2 * h, T(1));
    }
  }
  if (config.output_prior > 0.0) {
    const double logit = std::log(config.output_prior / (1.0 - config.output_prior));
    for (T& b : p.block("output.bias")) b = static_cast<T>(logit);
  }
  // Running variance starts at 1.
  for (int st = 0; st < config.stages() && config.norm == NormKind::kBatch; ++st) {
    const auto c = static_cast<std::size_t>(config.conv_channels[static_cast<std::size_t>(st)]);
    const std::size_t off = p.layout.running_offset(st);
    std::fill(p.running.begin() + static_cast<std::ptrdiff_t>(off + c),
              p.running.begin() + static_cast<std::ptrdiff_t>(off + 2 * c), T(1));
  }
  return p;
}

template <typename T>
Tensor3<T> to_tensor(const FeatureStack& stack) {
  Tensor3<T> t(stack.channels, stack.n_mels, stack.n_frames);
  std::copy(stack.data.begin(), stack.data.end(), t.data.begin());
  return t;
}

namespace {

template <typename T>
struct StageView {
  ConvGeometry conv;
  std::span<const T> conv_w, conv_b, scale, shift;
  bool se = false;
  SeGeometry se_geom;
  SeWeights<T> se_w;
  int pool = 1;
  std::string prefix;
};

template <typename T>
StageView<T> stage_view(const ModelParams<T>& p, int s) {
  const auto& c = p.config;
  StageView<T> v;
  v.prefix = "stage" + std::to_string(s) + ".";
  v.conv.in_channels = s == 0 ? c.in_channels : c.conv_channels[static_cast<std::size_t>(s - 1)];
  v.conv.out_channels = c.conv_channels[static_cast<std::size_t>(s)];
  v.conv.kernel_rows = c.kernel_sizes[static_cast<std::size_t>(s)].first;
  v.conv.kernel_cols = c.kernel_sizes[static_cast<std::size_t>(s)].second;
  v.conv_w = p.block(v.prefix + "conv.weight");
  v.conv_b = p.block(v.prefix + "conv.bias");
  v.scale = p.block(v.prefix + "norm.scale");
  v.shift = p.block(v.prefix + "norm.shift");
  v.se = c.se_enabled;
  if (v.se) {
    v.se_geom = make_se_geometry(v.conv.out_channels, c.se_ratio);
    v.se_w = {p.block(v.prefix + "se.fc1.weight"), p.block(v.prefix + "se.fc1.bias"),
              p.block(v.prefix + "se.fc2.weight"), p.block(v.prefix + "se.fc2.bias")};
  }
  v.pool = c.freq_pool[static_cast<std::size_t>(s)];
  return v;
}

template <typename T>
std::span<T> grad_block(const ModelParams<T>& p, AlignedVector<T>& grads, const std::string& name) {
  const auto& s = p.layout.spec(name);
  return {grads.data() + s.offset, s.size};
}

template <typename T>
LstmWeights<T> lstm_weights(const ModelParams<T>& p, const char* dir) {
  const std::string pre = std::string("lstm.") + dir + ".";
  return {p.block(pre + "w_ih"), p.block(pre + "w_hh"), p.block(pre + "bias"),
          p.config.lstm_input(), p.config.lstm_hidden};
}

}  // namespace

template <typename T>
std::vector<RowMatrix<T>> forward_batch(const ModelParams<T>& params,
                                        std::span<const Tensor3<T>* const> inputs, Phase phase,
                                        ForwardCache<T>* cache) {
  const ModelConfig& cfg = params.config;
  const std::size_t nb = inputs.size();
  for (const auto* x : inputs) {
    if (x->channels != cfg.in_channels || x->rows != cfg.n_mels) {
      throw std::invalid_argument("model input is " + std::to_string(x->channels) + "x" +
                                  std::to_string(x->rows) + ", config expects " +
                                  std::to_string(cfg.in_channels) + "x" +
                                  std::to_string(cfg.n_mels));
    }
    if (x->cols < 1) throw std::invalid_argument("model input has no frames");
  }
  if (cache) {
    cache->phase = phase;
    cache->stages.assign(static_cast<std::size_t>(cfg.stages()), {});
  }
  const T eps = static_cast<T>(cfg.norm_eps);
  const bool batch_norm = cfg.norm == NormKind::kBatch;

  std::vector<Tensor3<T>> cur(nb);
  for (std::size_t b = 0; b < nb; ++b) cur[b] = *inputs[b];

  for (int s = 0; s < cfg.stages(); ++s) {
    const StageView<T> v = stage_view(params, s);
    std::vector<Tensor3<T>> z(nb);
    for (std::size_t b = 0; b < nb; ++b) z[b] = conv2d_forward(cur[b], v.conv_w, v.conv_b, v.conv);

    // z becomes xhat.
    std::vector<std::vector<T>> inv(nb);
    std::vector<T> bmean, bvar;
    if (!batch_norm) {
      for (std::size_t b = 0; b < nb; ++b) inv[b] = normalize_planes_in_place(z[b], eps);
    } else if (phase == Phase::kTrain) {
      std::vector<Tensor3<T>*> ptrs;
      for (auto& t : z) ptrs.push_back(&t);
      inv.assign(1, normalize_batch_in_place(std::span<Tensor3<T>* const>(ptrs), eps, &bmean, &bvar));
    } else {
      const std::size_t off = params.layout.running_offset(s);
      const auto c = static_cast<std::size_t>(v.conv.out_channels);
      const std::span<const T> rm(params.running.data() + off, c);
      const std::span<const T> rv(params.running.data() + off + c, c);
      for (std::size_t b = 0; b < nb; ++b) normalize_fixed_in_place(z[b], rm, rv, eps);
    }

    std::vector<Tensor3<T>> next(nb);
    std::vector<Tensor3<T>> act(nb);
    std::vector<SeCache<T>> se(nb);
    std::vector<std::vector<std::uint8_t>> argmax(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      Tensor3<T>& a = act[b];
      a = Tensor3<T>(z[b].channels, z[b].rows, z[b].cols);
      for (int c = 0; c < a.channels; ++c) {
        const T g = v.scale[static_cast<std::size_t>(c)], sh = v.shift[static_cast<std::size_t>(c)];
        const auto src = z[b].channel(c);
        auto dst = a.channel(c);
        for (std::size_t i = 0; i < src.size(); ++i) {
          const T y = g * src[i] + sh;
          dst[i] = y > T(0) ? y : T(0);
        }
      }
      if (v.se) {
        se_excitation(a, v.se_w, v.se_geom, se[b]);
        Tensor3<T> scaled = a;
        for (int c = 0; c < a.channels; ++c) {
          const T w = se[b].scale[static_cast<std::size_t>(c)];
          for (T& x : scaled.channel(c)) x *= w;
        }
        next[b] = freq_max_pool(scaled, v.pool, cache ? &argmax[b] : nullptr);
      } else {
        next[b] = freq_max_pool(a, v.pool, cache ? &argmax[b] : nullptr);
      }
    }
    if (cache) {
      auto& sc = cache->stages[static_cast<std::size_t>(s)];
      sc.input = std::move(cur);
      sc.xhat = std::move(z);
      sc.act = std::move(act);
      sc.inv_std = std::move(inv);
      sc.se = std::move(se);
      sc.argmax = std::move(argmax);
      sc.batch_mean = std::move(bmean);
      sc.batch_var = std::move(bvar);
    }
    cur = std::move(next);
  }

  const LstmWeights<T> wf = lstm_weights(params, "fwd");
  const LstmWeights<T> wb = lstm_weights(params, "bwd");
  const int h = cfg.lstm_hidden;
  ConstMatrixMap<T> w_out(params.block("output.weight").data(), cfg.n_classes, 2 * h);
  ConstVectorMap<T> b_out(params.block("output.bias").data(), cfg.n_classes);
  if (cache) {
    cache->lstm_input.resize(nb);
    cache->lstm_fwd.resize(nb);
    cache->lstm_bwd.resize(nb);
    cache->lstm_output.resize(nb);
  }
  std::vector<RowMatrix<T>> outputs(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    // After the last pool the frequency axis is 1: channels x frames.
    Sequence<T> seq = cur[b].matrix();
    Sequence<T> y(2 * h, seq.cols());
    y.topRows(h) = lstm_forward(seq, wf, false, cache ? &cache->lstm_fwd[b] : nullptr);
    y.bottomRows(h) = lstm_forward(seq, wb, true, cache ? &cache->lstm_bwd[b] : nullptr);
    RowMatrix<T> logits = w_out * y;
    logits.colwise() += b_out;
    outputs[b] = logits.unaryExpr([](T x) { return sigmoid(x); });
    if (cache) {
      cache->lstm_input[b] = std::move(seq);
      cache->lstm_output[b] = std::move(y);
    }
  }
  if (cache) cache->activations = outputs;
  return outputs;
}

template <typename T>
void backward_batch(const ModelParams<T>& params, const ForwardCache<T>& cache,
                    std::span<const RowMatrix<T>> upstream, AlignedVector<T>& grads) {
  const ModelConfig& cfg = params.config;
  const std::size_t nb = cache.activations.size();
  if (upstream.size() != nb) throw std::invalid_argument("upstream gradient count mismatch");
  if (grads.size() != params.values.size()) grads.assign(params.values.size(), T(0));
  const bool batch_norm = cfg.norm == NormKind::kBatch;
  if (batch_norm && cache.phase != Phase::kTrain) {
    throw std::invalid_argument("batch-norm backward requires a training-phase forward pass");
  }
  const int h = cfg.lstm_hidden;

  ConstMatrixMap<T> w_out(params.block("output.weight").data(), cfg.n_classes, 2 * h);
  MatrixMap<T> dw_out(grad_block(params, grads, "output.weight").data(), cfg.n_classes, 2 * h);
  VectorMap<T> db_out(grad_block(params, grads, "output.bias").data(), cfg.n_classes);
  const LstmWeights<T> wf = lstm_weights(params, "fwd");
  const LstmWeights<T> wb = lstm_weights(params, "bwd");
  const LstmGrads<T> gf{grad_block(params, grads, "lstm.fwd.w_ih"),
                        grad_block(params, grads, "lstm.fwd.w_hh"),
                        grad_block(params, grads, "lstm.fwd.bias")};
  const LstmGrads<T> gb{grad_block(params, grads, "lstm.bwd.w_ih"),
                        grad_block(params, grads, "lstm.bwd.w_hh"),
                        grad_block(params, grads, "lstm.bwd.bias")};

  std::vector<Tensor3<T>> dcur(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const RowMatrix<T>& a = cache.activations[b];
    if (upstream[b].rows() != a.rows() || upstream[b].cols() != a.cols()) {
      throw std::invalid_argument("upstream gradient shape mismatch");
    }
    RowMatrix<T> dlogits = upstream[b].cwiseProduct(a.cwiseProduct((T(1) - a.array()).matrix()));
    const Sequence<T>& y = cache.lstm_output[b];
    dw_out.noalias() += dlogits * y.transpose();
    db_out += dlogits.rowwise().sum();
    Sequence<T> dy = w_out.transpose() * dlogits;
    const Sequence<T>& seq = cache.lstm_input[b];
    Sequence<T> dseq = lstm_backward(seq, wf, false, cache.lstm_fwd[b], Sequence<T>(dy.topRows(h)), gf);
    dseq += lstm_backward(seq, wb, true, cache.lstm_bwd[b], Sequence<T>(dy.bottomRows(h)), gb);
    Tensor3<T> d(static_cast<int>(dseq.rows()), 1, static_cast<int>(dseq.cols()));
    d.matrix() = dseq;
    dcur[b] = std::move(d);
  }

  for (int s = cfg.stages() - 1; s >= 0; --s) {
    const StageView<T> v = stage_view(params, s);
    const auto& sc = cache.stages[static_cast<std::size_t>(s)];
    auto dscale = grad_block(params, grads, v.prefix + "norm.scale");
    auto dshift = grad_block(params, grads, v.prefix + "norm.shift");
    SeGrads<T> seg{};
    if (v.se) {
      seg = {grad_block(params, grads, v.prefix + "se.fc1.weight"),
             grad_block(params, grads, v.prefix + "se.fc1.bias"),
             grad_block(params, grads, v.prefix + "se.fc2.weight"),
             grad_block(params, grads, v.prefix + "se.fc2.bias")};
    }
    std::vector<Tensor3<T>> dz(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const Tensor3<T>& a = sc.act[b];
      Tensor3<T> ds = freq_max_pool_backward(dcur[b], v.pool, sc.argmax[b], a.rows);
      Tensor3<T> da = v.se ? se_backward(a, sc.se[b], v.se_w, v.se_geom, ds, seg) : std::move(ds);
      // ReLU, then the affine part of the norm.
      for (int c = 0; c < a.channels; ++c) {
        const auto av = a.channel(c);
        const auto xh = sc.xhat[b].channel(c);
        auto g = da.channel(c);
        double sg = 0.0, sgx = 0.0;
        const T gm = v.scale[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T gi = av[i] > T(0) ? g[i] : T(0);
          sg += gi;
          sgx += static_cast<double>(gi) * xh[i];
          g[i] = gi * gm;
        }
        dshift[static_cast<std::size_t>(c)] += static_cast<T>(sg);
        dscale[static_cast<std::size_t>(c)] += static_cast<T>(sgx);
      }
      dz[b] = std::move(da);
    }
    if (!batch_norm) {
      for (std::size_t b = 0; b < nb; ++b) {
        normalize_planes_backward(sc.xhat[b], std::span<const T>(sc.inv_std[b]), dz[b]);
      }
    } else {
      std::vector<const Tensor3<T>*> xs;
      std::vector<Tensor3<T>*> gs;
      for (std::size_t b = 0; b < nb; ++b) {
        xs.push_back(&sc.xhat[b]);
        gs.push_back(&dz[b]);
      }
      normalize_batch_backward(std::span<const Tensor3<T>* const>(xs),
                               std::span<const T>(sc.inv_std[0]),
                               std::span<Tensor3<T>* const>(gs));
    }
    auto dw = grad_block(params, grads, v.prefix + "conv.weight");
    auto db = grad_block(params, grads, v.prefix + "conv.bias");
    for (std::size_t b = 0; b < nb; ++b) {
      Tensor3<T> dx;
      conv2d_backward(sc.input[b], v.conv_w, v.conv, dz[b], dw, db, s > 0 ? &dx : nullptr);
      dcur[b] = std::move(dx);
    }
  }
}

template <typename T>
RowMatrix<T> model_forward(const Tensor3<T>& input, const ModelParams<T>& params) {
  const Tensor3<T>* ptr = &input;
  return forward_batch(params, std::span<const Tensor3<T>* const>(&ptr, 1), Phase::kInference).front();
}

template <typename T>
AlignedVector<T> model_backward(const Tensor3<T>& input, const ModelParams<T>& params,
                              const RowMatrix<T>& upstream) {
  const Tensor3<T>* ptr = &input;
  ForwardCache<T> cache;
  forward_batch(params, std::span<const Tensor3<T>* const>(&ptr, 1), Phase::kTrain, &cache);
  AlignedVector<T> grads(params.values.size(), T(0));
  backward_batch(params, cache, std::span<const RowMatrix<T>>(&upstream, 1), grads);
  return grads;
}

template <typename T>
void update_running_stats(ModelParams<T>& params, const ForwardCache<T>& cache, T momentum) {
  if (params.config.norm != NormKind::kBatch || cache.phase != Phase::kTrain) return;
  for (int s = 0; s < params.config.stages(); ++s) {
    const auto& sc = cache.stages[static_cast<std::size_t>(s)];
    const std::size_t off = params.layout.running_offset(s);
    const std::size_t c = sc.batch_mean.size();
    for (std::size_t i = 0; i < c; ++i) {
      T& m = params.running[off + i];
      T& var = params.running[off + c + i];
      m = (T(1) - momentum) * m + momentum * sc.batch_mean[i];
      var = (T(1) - momentum) * var + momentum * sc.batch_var[i];
    }
  }
}

#define PRIMADNN_INSTANTIATE_MODEL(T)                                                           \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                    \
  template Tensor3<T> to_tensor<T>(const FeatureStack&);                                        \
  template std::vector<RowMatrix<T>> forward_batch<T>(const ModelParams<T>&,                    \
                                                      std::span<const Tensor3<T>* const>,       \
                                                      Phase, ForwardCache<T>*);                 \
  template void backward_batch<T>(const ModelParams<T>&, const ForwardCache<T>&,                \
                                  std::span<const RowMatrix<T>>, AlignedVector<T>&);              \
  template RowMatrix<T> model_forward<T>(const Tensor3<T>&, const ModelParams<T>&);             \
  template AlignedVector<T> model_backward<T>(const Tensor3<T>&, const ModelParams<T>&,           \
                                            const RowMatrix<T>&);                               \
  template void update_running_stats<T>(ModelParams<T>&, const ForwardCache<T>&, T);

PRIMADNN_INSTANTIATE_MODEL(float)
PRIMADNN_INSTANTIATE_MODEL(double)

}  // namespace primadnn
