#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "primadnn/tensor.hpp"

namespace primadnn {

/// Logistic function with the argument clamped to [-30, 30].
template <typename T>
inline T sigmoid(T x) {
  const T c = x < T(-30) ? T(-30) : (x > T(30) ? T(30) : x);
  return T(1) / (T(1) + std::exp(-c));
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation), zero "same" padding, stride 1.

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_rows = 0;
  int kernel_cols = 0;

  int fan_in() const { return in_channels * kernel_rows * kernel_cols; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * fan_in();
  }
};

/// (in_channels * kr * kc) x (rows * cols) patch matrix.
template <typename T>
void im2col(const Tensor3<T>& x, int kernel_rows, int kernel_cols, RowMatrix<T>& cols);

/// Scatter-adds a patch-matrix gradient back onto `dx`.
template <typename T>
void col2im_add(const RowMatrix<T>& cols, int kernel_rows, int kernel_cols, Tensor3<T>& dx);

/// weight: out x in x kr x kc; bias: out.
template <typename T>
Tensor3<T> conv2d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias,
                          const ConvGeometry& g);

/// Accumulates into dweight/dbias. dx is skipped when null.
template <typename T>
void conv2d_backward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias,
                     Tensor3<T>* dx);

// ---------------------------------------------------------------------------
// Normalization. Both kinds share the normalize-then-affine structure; only
// the set of cells a statistic is pooled over differs.

template <typename T>
struct InstanceNormCache {
  Tensor3<T> xhat;
  std::vector<T> inv_std;  // per channel
};

/// Normalizes each channel plane to zero mean and unit variance in place,
/// returning 1/sqrt(var + eps) per channel.
template <typename T>
std::vector<T> normalize_planes_in_place(Tensor3<T>& x, T eps);

/// Batch statistics over every instance's channel plane; normalizes in place.
template <typename T>
std::vector<T> normalize_batch_in_place(std::span<Tensor3<T>* const> xs, T eps,
                                        std::vector<T>* batch_mean = nullptr,
                                        std::vector<T>* batch_var = nullptr);

/// Normalizes with fixed statistics (batch-norm inference).
template <typename T>
void normalize_fixed_in_place(Tensor3<T>& x, std::span<const T> mean, std::span<const T> var,
                              T eps);

/// In place: dxhat -> dx for plane-wise (instance) normalization.
template <typename T>
void normalize_planes_backward(const Tensor3<T>& xhat, std::span<const T> inv_std,
                               Tensor3<T>& grad);

/// In place: dxhat -> dx for batch normalization (statistics shared over
/// the batch).
template <typename T>
void normalize_batch_backward(std::span<const Tensor3<T>* const> xhats, std::span<const T> inv_std,
                              std::span<Tensor3<T>* const> grads);

template <typename T>
Tensor3<T> instance_norm_forward(const Tensor3<T>& x, std::span<const T> gamma,
                                 std::span<const T> beta, T eps,
                                 InstanceNormCache<T>* cache = nullptr);

/// Returns dx; accumulates dgamma/dbeta.
template <typename T>
Tensor3<T> instance_norm_backward(const InstanceNormCache<T>& cache, std::span<const T> gamma,
                                  const Tensor3<T>& dy, std::span<T> dgamma, std::span<T> dbeta);

// ---------------------------------------------------------------------------
// Squeeze-and-excitation: global average -> affine C->C/r -> ReLU ->
// affine C/r->C -> sigmoid -> per-channel rescale.

struct SeGeometry {
  int channels = 0;
  int reduced = 0;
};

/// Throws std::invalid_argument when `ratio` does not divide `channels`.
SeGeometry make_se_geometry(int channels, int ratio);

template <typename T>
struct SeWeights {
  std::span<const T> fc1_weight;  // reduced x channels
  std::span<const T> fc1_bias;    // reduced
  std::span<const T> fc2_weight;  // channels x reduced
  std::span<const T> fc2_bias;    // channels
};

template <typename T>
struct SeGrads {
  std::span<T> fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

template <typename T>
struct SeCache {
  std::vector<T> squeeze;  // channels
  std::vector<T> hidden;   // reduced, post-ReLU
  std::vector<T> scale;    // channels, in (0, 1)
};

/// Computes only the excitation weights into `cache.scale`.
template <typename T>
void se_excitation(const Tensor3<T>& x, const SeWeights<T>& w, const SeGeometry& g,
                   SeCache<T>& cache);

template <typename T>
Tensor3<T> se_forward(const Tensor3<T>& x, const SeWeights<T>& w, const SeGeometry& g,
                      SeCache<T>* cache = nullptr);

/// dout is the gradient of the rescaled output; returns dx.
template <typename T>
Tensor3<T> se_backward(const Tensor3<T>& x, const SeCache<T>& cache, const SeWeights<T>& w,
                       const SeGeometry& g, const Tensor3<T>& dout, const SeGrads<T>& grads);

// ---------------------------------------------------------------------------
// Frequency-only max pooling with stride == window.

/// argmax (offset within each window, first on ties) is recorded when given.
template <typename T>
Tensor3<T> freq_max_pool(const Tensor3<T>& x, int window, std::vector<std::uint8_t>* argmax);

template <typename T>
Tensor3<T> freq_max_pool_backward(const Tensor3<T>& dy, int window,
                                  const std::vector<std::uint8_t>& argmax, int input_rows);

// ---------------------------------------------------------------------------
// LSTM. Gate order in the stacked weights is input, forget, cell, output.

template <typename T>
struct LstmWeights {
  std::span<const T> w_ih;  // 4H x D
  std::span<const T> w_hh;  // 4H x H
  std::span<const T> bias;  // 4H
  int input_size = 0;
  int hidden = 0;
};

template <typename T>
struct LstmGrads {
  std::span<T> w_ih, w_hh, bias;
};

/// Column-major; one column per frame.
template <typename T>
using Sequence = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
struct LstmCache {
  Sequence<T> gates;  // 4H x T, post-nonlinearity, processing order
  Sequence<T> cell;   // H x T, processing order
  Sequence<T> hidden; // H x T, processing order
};

/// x is D x T. With `reverse` the sequence is processed from the last frame
/// to the first. The result is H x T indexed by original time. Initial
/// hidden and cell states are zero.
template <typename T>
Sequence<T> lstm_forward(const Sequence<T>& x, const LstmWeights<T>& w, bool reverse,
                         LstmCache<T>* cache);

/// dh is H x T (original time order). Accumulates weight gradients and
/// returns dx (D x T).
template <typename T>
Sequence<T> lstm_backward(const Sequence<T>& x, const LstmWeights<T>& w, bool reverse,
                          const LstmCache<T>& cache, const Sequence<T>& dh,
                          const LstmGrads<T>& grads);

}  // namespace primadnn
