#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "primadnn/frontend.hpp"
#include "primadnn/layers.hpp"
#include "primadnn/tensor.hpp"

namespace primadnn {

enum class NormKind { kInstance, kBatch };

std::string to_string(NormKind kind);
NormKind parse_norm_kind(const std::string& s);

/// Architecture of the convolutional-recurrent detector. Each conv stage is
/// conv -> norm -> ReLU -> SE (optional) -> frequency max-pool; the pooled
/// channel vector per frame feeds a bidirectional LSTM and an affine +
/// sigmoid output layer.
struct ModelConfig {
  int in_channels = 4;
  int n_mels = 160;
  std::vector<int> conv_channels{32, 64, 64, 64};
  std::vector<std::pair<int, int>> kernel_sizes{{5, 5}, {5, 5}, {3, 3}, {3, 3}};
  std::vector<int> freq_pool{4, 4, 2, 5};
  bool se_enabled = true;
  int se_ratio = 2;
  NormKind norm = NormKind::kInstance;
  double norm_eps = 1e-5;
  int lstm_hidden = 128;
  int n_classes = 9;
  /// Output biases start at logit(prior) so early training does not spend
  /// steps pushing every activation away from 0.5; 0 keeps the uniform init.
  double output_prior = 0.05;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  int stages() const { return static_cast<int>(conv_channels.size()); }
  int lstm_input() const { return conv_channels.back(); }

  /// 2 conv channels, 8 mel bins; small enough for exhaustive gradient checks.
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

enum class ParamGroup { kConv, kNorm, kSe, kLstm, kOutput };
std::string to_string(ParamGroup group);

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamGroup group = ParamGroup::kConv;
  int fan_in = 1;
};

/// Flat parameter layout: every learnable array is a named slice of one
/// contiguous vector, so optimizers and serializers treat the model as a
/// single vector.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<ParamSpec>& specs() const { return specs_; }
  const ParamSpec& spec(const std::string& name) const;
  std::size_t total() const { return total_; }
  /// Batch-norm running statistics: mean then variance, per stage.
  std::size_t running_offset(int stage) const { return running_offsets_.at(static_cast<std::size_t>(stage)); }
  std::size_t running_total() const { return running_total_; }

 private:
  void add(std::string name, std::vector<int> shape, ParamGroup group, int fan_in);

  std::vector<ParamSpec> specs_;
  std::size_t total_ = 0;
  std::vector<std::size_t> running_offsets_;
  std::size_t running_total_ = 0;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  ParamLayout layout;
  AlignedVector<T> values;
  AlignedVector<T> running;  // batch-norm running mean/var; empty for instance norm

  std::span<const T> block(const std::string& name) const {
    const auto& s = layout.spec(name);
    return {values.data() + s.offset, s.size};
  }
  std::span<T> block(const std::string& name) {
    const auto& s = layout.spec(name);
    return {values.data() + s.offset, s.size};
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    out.layout = layout;
    out.values.assign(values.begin(), values.end());
    out.running.assign(running.begin(), running.end());
    return out;
  }
};

/// Seeded initialization: weights and biases ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)); LSTM ~ U(-1/sqrt(H), 1/sqrt(H)) with forget-gate bias
/// 1; norm scale 1, shift 0.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Converts a feature stack into the network input tensor.
template <typename T>
Tensor3<T> to_tensor(const FeatureStack& stack);

enum class Phase { kTrain, kInference };

template <typename T>
struct StageCache {
  std::vector<Tensor3<T>> input;               // per instance
  std::vector<Tensor3<T>> xhat;                // normalized conv output
  std::vector<Tensor3<T>> act;                 // post-ReLU
  std::vector<std::vector<T>> inv_std;         // per instance (IN) or one shared entry (BN)
  std::vector<SeCache<T>> se;
  std::vector<std::vector<std::uint8_t>> argmax;
  std::vector<T> batch_mean, batch_var;        // BN training statistics
};

template <typename T>
struct ForwardCache {
  Phase phase = Phase::kInference;
  std::vector<StageCache<T>> stages;
  std::vector<Sequence<T>> lstm_input;   // D x T
  std::vector<LstmCache<T>> lstm_fwd, lstm_bwd;
  std::vector<Sequence<T>> lstm_output;  // 2H x T
  std::vector<RowMatrix<T>> activations; // n_classes x T
};

/// Batched forward pass. Instances may differ in frame count. Under
/// instance norm each instance is processed independently; under batch
/// norm the training phase pools statistics over the batch while
/// inference uses the running statistics.
template <typename T>
std::vector<RowMatrix<T>> forward_batch(const ModelParams<T>& params,
                                        std::span<const Tensor3<T>* const> inputs, Phase phase,
                                        ForwardCache<T>* cache = nullptr);

/// Reverse-mode gradients of sum_b <upstream_b, activations_b>. Gradients
/// are accumulated into `grads` (sized like params.values) in instance
/// order.
template <typename T>
void backward_batch(const ModelParams<T>& params, const ForwardCache<T>& cache,
                    std::span<const RowMatrix<T>> upstream, AlignedVector<T>& grads);

/// Single-clip convenience wrappers.
template <typename T>
RowMatrix<T> model_forward(const Tensor3<T>& input, const ModelParams<T>& params);

template <typename T>
AlignedVector<T> model_backward(const Tensor3<T>& input, const ModelParams<T>& params,
                              const RowMatrix<T>& upstream);

/// Blends batch statistics from a training forward pass into the running
/// estimates (no-op for instance norm).
template <typename T>
void update_running_stats(ModelParams<T>& params, const ForwardCache<T>& cache, T momentum);

}  // namespace primadnn
