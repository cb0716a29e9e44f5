#include "primadnn/layers.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace primadnn {

namespace {

void check_odd_kernel(int kr, int kc) {
  if (kr % 2 == 0 || kc % 2 == 0) throw std::invalid_argument("same padding needs odd kernels");
}

}  // namespace

template <typename T>
void im2col(const Tensor3<T>& x, int kr, int kc, RowMatrix<T>& cols) {
  check_odd_kernel(kr, kc);
  const int nf = x.rows, nt = x.cols, pr = kr / 2, pc = kc / 2;
  cols.resize(static_cast<Eigen::Index>(x.channels) * kr * kc, static_cast<Eigen::Index>(x.plane()));
  for (int ci = 0; ci < x.channels; ++ci) {
    for (int dy = 0; dy < kr; ++dy) {
      for (int dx = 0; dx < kc; ++dx) {
        T* row = cols.row((static_cast<Eigen::Index>(ci) * kr + dy) * kc + dx).data();
        const int shift = dx - pc;
        const int lo = std::max(0, -shift), hi = std::min(nt, nt - shift);
        for (int f = 0; f < nf; ++f) {
          T* dst = row + static_cast<std::size_t>(f) * nt;
          const int sf = f + dy - pr;
          if (sf < 0 || sf >= nf || hi <= lo) {
            std::fill(dst, dst + nt, T(0));
            continue;
          }
          const T* src = &x.data[(static_cast<std::size_t>(ci) * nf + sf) * nt];
          std::fill(dst, dst + lo, T(0));
          std::memcpy(dst + lo, src + lo + shift, sizeof(T) * static_cast<std::size_t>(hi - lo));
          std::fill(dst + hi, dst + nt, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const RowMatrix<T>& cols, int kr, int kc, Tensor3<T>& dx) {
  const int nf = dx.rows, nt = dx.cols, pr = kr / 2, pc = kc / 2;
  for (int ci = 0; ci < dx.channels; ++ci) {
    for (int dy = 0; dy < kr; ++dy) {
      for (int ddx = 0; ddx < kc; ++ddx) {
        const T* row = cols.row((static_cast<Eigen::Index>(ci) * kr + dy) * kc + ddx).data();
        const int shift = ddx - pc;
        const int lo = std::max(0, -shift), hi = std::min(nt, nt - shift);
        for (int f = 0; f < nf; ++f) {
          const int sf = f + dy - pr;
          if (sf < 0 || sf >= nf) continue;
          const T* src = row + static_cast<std::size_t>(f) * nt;
          T* dst = &dx.data[(static_cast<std::size_t>(ci) * nf + sf) * nt];
          for (int t = lo; t < hi; ++t) dst[t + shift] += src[t];
        }
      }
    }
  }
}

template <typename T>
Tensor3<T> conv2d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias,
                          const ConvGeometry& g) {
  if (x.channels != g.in_channels) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.channels) +
                                " channels, layer expects " + std::to_string(g.in_channels));
  }
  if (weight.size() != g.weight_count() || bias.size() != static_cast<std::size_t>(g.out_channels)) {
    throw std::invalid_argument("conv2d: parameter shape mismatch");
  }
  RowMatrix<T> cols;
  im2col(x, g.kernel_rows, g.kernel_cols, cols);
  Tensor3<T> y(g.out_channels, x.rows, x.cols);
  auto ym = y.matrix();
  ConstMatrixMap<T> w(weight.data(), g.out_channels, g.fan_in());
  ym.noalias() = w * cols;
  ym.colwise() += ConstVectorMap<T>(bias.data(), g.out_channels);
  return y;
}

template <typename T>
void conv2d_backward(const Tensor3<T>& x, std::span<const T> weight, const ConvGeometry& g,
                     const Tensor3<T>& dy, std::span<T> dweight, std::span<T> dbias,
                     Tensor3<T>* dx) {
  if (dy.channels != g.out_channels || dy.rows != x.rows || dy.cols != x.cols) {
    throw std::invalid_argument("conv2d backward: gradient shape mismatch");
  }
  RowMatrix<T> cols;
  im2col(x, g.kernel_rows, g.kernel_cols, cols);
  const auto dym = dy.matrix();
  MatrixMap<T> dw(dweight.data(), g.out_channels, g.fan_in());
  dw.noalias() += dym * cols.transpose();
  VectorMap<T>(dbias.data(), g.out_channels) += dym.rowwise().sum();
  if (dx != nullptr) {
    if (!dx->same_shape(x)) *dx = Tensor3<T>(x.channels, x.rows, x.cols);
    // Reuse the patch buffer for the input gradient.
    const RowMatrix<T> wt = ConstMatrixMap<T>(weight.data(), g.out_channels, g.fan_in()).transpose();
    cols.noalias() = wt * dym;
    col2im_add(cols, g.kernel_rows, g.kernel_cols, *dx);
  }
}

template <typename T>
std::vector<T> normalize_planes_in_place(Tensor3<T>& x, T eps) {
  std::vector<T> inv_std(static_cast<std::size_t>(x.channels));
  const double n = static_cast<double>(x.plane());
  for (int c = 0; c < x.channels; ++c) {
    auto p = x.channel(c);
    double sum = 0.0;
    for (T v : p) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (T v : p) sq += (v - mean) * (v - mean);
    const double inv = 1.0 / std::sqrt(sq / n + static_cast<double>(eps));
    for (T& v : p) v = static_cast<T>((v - mean) * inv);
    inv_std[static_cast<std::size_t>(c)] = static_cast<T>(inv);
  }
  return inv_std;
}

template <typename T>
std::vector<T> normalize_batch_in_place(std::span<Tensor3<T>* const> xs, T eps,
                                        std::vector<T>* batch_mean, std::vector<T>* batch_var) {
  if (xs.empty()) return {};
  const int nc = xs.front()->channels;
  std::vector<T> inv_std(static_cast<std::size_t>(nc));
  if (batch_mean) batch_mean->assign(static_cast<std::size_t>(nc), T(0));
  if (batch_var) batch_var->assign(static_cast<std::size_t>(nc), T(0));
  for (int c = 0; c < nc; ++c) {
    double sum = 0.0, n = 0.0;
    for (auto* x : xs) {
      for (T v : x->channel(c)) sum += v;
      n += static_cast<double>(x->plane());
    }
    const double mean = sum / n;
    double sq = 0.0;
    for (auto* x : xs) {
      for (T v : x->channel(c)) sq += (v - mean) * (v - mean);
    }
    const double var = sq / n;
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (auto* x : xs) {
      for (T& v : x->channel(c)) v = static_cast<T>((v - mean) * inv);
    }
    inv_std[static_cast<std::size_t>(c)] = static_cast<T>(inv);
    if (batch_mean) (*batch_mean)[static_cast<std::size_t>(c)] = static_cast<T>(mean);
    if (batch_var) (*batch_var)[static_cast<std::size_t>(c)] = static_cast<T>(var);
  }
  return inv_std;
}

template <typename T>
void normalize_fixed_in_place(Tensor3<T>& x, std::span<const T> mean, std::span<const T> var,
                              T eps) {
  for (int c = 0; c < x.channels; ++c) {
    const T m = mean[static_cast<std::size_t>(c)];
    const T inv = T(1) / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    for (T& v : x.channel(c)) v = (v - m) * inv;
  }
}

template <typename T>
void normalize_planes_backward(const Tensor3<T>& xhat, std::span<const T> inv_std,
                               Tensor3<T>& grad) {
  const double n = static_cast<double>(xhat.plane());
  for (int c = 0; c < xhat.channels; ++c) {
    auto g = grad.channel(c);
    const auto xh = xhat.channel(c);
    double sg = 0.0, sgx = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      sg += g[i];
      sgx += static_cast<double>(g[i]) * xh[i];
    }
    const double mg = sg / n, mgx = sgx / n;
    const double inv = inv_std[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = static_cast<T>(inv * (g[i] - mg - xh[i] * mgx));
    }
  }
}

template <typename T>
void normalize_batch_backward(std::span<const Tensor3<T>* const> xhats, std::span<const T> inv_std,
                              std::span<Tensor3<T>* const> grads) {
  if (xhats.empty()) return;
  const int nc = xhats.front()->channels;
  for (int c = 0; c < nc; ++c) {
    double sg = 0.0, sgx = 0.0, n = 0.0;
    for (std::size_t b = 0; b < xhats.size(); ++b) {
      const auto g = grads[b]->channel(c);
      const auto xh = xhats[b]->channel(c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        sg += g[i];
        sgx += static_cast<double>(g[i]) * xh[i];
      }
      n += static_cast<double>(g.size());
    }
    const double mg = sg / n, mgx = sgx / n;
    const double inv = inv_std[static_cast<std::size_t>(c)];
    for (std::size_t b = 0; b < xhats.size(); ++b) {
      auto g = grads[b]->channel(c);
      const auto xh = xhats[b]->channel(c);
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = static_cast<T>(inv * (g[i] - mg - xh[i] * mgx));
      }
    }
  }
}

template <typename T>
Tensor3<T> instance_norm_forward(const Tensor3<T>& x, std::span<const T> gamma,
                                 std::span<const T> beta, T eps, InstanceNormCache<T>* cache) {
  Tensor3<T> xhat = x;
  std::vector<T> inv = normalize_planes_in_place(xhat, eps);
  Tensor3<T> y(x.channels, x.rows, x.cols);
  for (int c = 0; c < x.channels; ++c) {
    const T gm = gamma[static_cast<std::size_t>(c)], bt = beta[static_cast<std::size_t>(c)];
    auto src = xhat.channel(c);
    auto dst = y.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = gm * src[i] + bt;
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

template <typename T>
Tensor3<T> instance_norm_backward(const InstanceNormCache<T>& cache, std::span<const T> gamma,
                                  const Tensor3<T>& dy, std::span<T> dgamma, std::span<T> dbeta) {
  Tensor3<T> g = dy;
  for (int c = 0; c < dy.channels; ++c) {
    const auto d = dy.channel(c);
    const auto xh = cache.xhat.channel(c);
    double sg = 0.0, sgx = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      sg += d[i];
      sgx += static_cast<double>(d[i]) * xh[i];
    }
    dbeta[static_cast<std::size_t>(c)] += static_cast<T>(sg);
    dgamma[static_cast<std::size_t>(c)] += static_cast<T>(sgx);
    const T gm = gamma[static_cast<std::size_t>(c)];
    for (T& v : g.channel(c)) v *= gm;
  }
  normalize_planes_backward(cache.xhat, std::span<const T>(cache.inv_std), g);
  return g;
}

SeGeometry make_se_geometry(int channels, int ratio) {
  if (ratio < 1 || channels % ratio != 0) {
    throw std::invalid_argument("se: " + std::to_string(channels) +
                                " channels not divisible by reduction ratio " + std::to_string(ratio));
  }
  return {channels, channels / ratio};
}

template <typename T>
void se_excitation(const Tensor3<T>& x, const SeWeights<T>& w, const SeGeometry& g,
                   SeCache<T>& cache) {
  if (x.channels != g.channels) throw std::invalid_argument("se: channel mismatch");
  const int nc = g.channels, nr = g.reduced;
  cache.squeeze.assign(static_cast<std::size_t>(nc), T(0));
  const double n = static_cast<double>(x.plane());
  for (int c = 0; c < nc; ++c) {
    double s = 0.0;
    for (T v : x.channel(c)) s += v;
    cache.squeeze[static_cast<std::size_t>(c)] = static_cast<T>(s / n);
  }
  cache.hidden.assign(static_cast<std::size_t>(nr), T(0));
  for (int r = 0; r < nr; ++r) {
    T a = w.fc1_bias[static_cast<std::size_t>(r)];
    for (int c = 0; c < nc; ++c) {
      a += w.fc1_weight[static_cast<std::size_t>(r) * nc + c] * cache.squeeze[static_cast<std::size_t>(c)];
    }
    cache.hidden[static_cast<std::size_t>(r)] = a > T(0) ? a : T(0);
  }
  cache.scale.assign(static_cast<std::size_t>(nc), T(0));
  for (int c = 0; c < nc; ++c) {
    T a = w.fc2_bias[static_cast<std::size_t>(c)];
    for (int r = 0; r < nr; ++r) {
      a += w.fc2_weight[static_cast<std::size_t>(c) * nr + r] * cache.hidden[static_cast<std::size_t>(r)];
    }
    cache.scale[static_cast<std::size_t>(c)] = sigmoid(a);
  }
}

template <typename T>
Tensor3<T> se_forward(const Tensor3<T>& x, const SeWeights<T>& w, const SeGeometry& g,
                      SeCache<T>* cache) {
  if (g.reduced <= 0) throw std::invalid_argument("se: empty bottleneck");
  SeCache<T> local;
  SeCache<T>& cc = cache ? *cache : local;
  se_excitation(x, w, g, cc);
  Tensor3<T> y = x;
  for (int c = 0; c < x.channels; ++c) {
    const T s = cc.scale[static_cast<std::size_t>(c)];
    for (T& v : y.channel(c)) v *= s;
  }
  return y;
}

template <typename T>
Tensor3<T> se_backward(const Tensor3<T>& x, const SeCache<T>& cache, const SeWeights<T>& w,
                       const SeGeometry& g, const Tensor3<T>& dout, const SeGrads<T>& grads) {
  const int nc = g.channels, nr = g.reduced;
  const double n = static_cast<double>(x.plane());
  Tensor3<T> dx(x.channels, x.rows, x.cols);
  std::vector<T> da2(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    const auto d = dout.channel(c);
    const auto xv = x.channel(c);
    auto o = dx.channel(c);
    const T s = cache.scale[static_cast<std::size_t>(c)];
    double ds = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      ds += static_cast<double>(d[i]) * xv[i];
      o[i] = s * d[i];
    }
    da2[static_cast<std::size_t>(c)] = static_cast<T>(ds) * s * (T(1) - s);
  }
  std::vector<T> dh(static_cast<std::size_t>(nr), T(0));
  for (int c = 0; c < nc; ++c) {
    const T a = da2[static_cast<std::size_t>(c)];
    grads.fc2_bias[static_cast<std::size_t>(c)] += a;
    for (int r = 0; r < nr; ++r) {
      grads.fc2_weight[static_cast<std::size_t>(c) * nr + r] += a * cache.hidden[static_cast<std::size_t>(r)];
      dh[static_cast<std::size_t>(r)] += w.fc2_weight[static_cast<std::size_t>(c) * nr + r] * a;
    }
  }
  std::vector<T> dsq(static_cast<std::size_t>(nc), T(0));
  for (int r = 0; r < nr; ++r) {
    const T a = cache.hidden[static_cast<std::size_t>(r)] > T(0) ? dh[static_cast<std::size_t>(r)] : T(0);
    grads.fc1_bias[static_cast<std::size_t>(r)] += a;
    for (int c = 0; c < nc; ++c) {
      grads.fc1_weight[static_cast<std::size_t>(r) * nc + c] += a * cache.squeeze[static_cast<std::size_t>(c)];
      dsq[static_cast<std::size_t>(c)] += w.fc1_weight[static_cast<std::size_t>(r) * nc + c] * a;
    }
  }
  for (int c = 0; c < nc; ++c) {
    const T add = static_cast<T>(dsq[static_cast<std::size_t>(c)] / n);
    for (T& v : dx.channel(c)) v += add;
  }
  return dx;
}

template <typename T>
Tensor3<T> freq_max_pool(const Tensor3<T>& x, int window, std::vector<std::uint8_t>* argmax) {
  if (window < 1 || window > 255 || x.rows % window != 0) {
    throw std::invalid_argument("frequency pool window " + std::to_string(window) +
                                " does not divide " + std::to_string(x.rows) + " rows");
  }
  const int out_rows = x.rows / window;
  Tensor3<T> y(x.channels, out_rows, x.cols);
  if (argmax) argmax->assign(y.size(), 0);
  for (int c = 0; c < x.channels; ++c) {
    for (int r = 0; r < out_rows; ++r) {
      T* dst = &y.data[(static_cast<std::size_t>(c) * out_rows + r) * x.cols];
      std::uint8_t* am = argmax ? argmax->data() + (static_cast<std::size_t>(c) * out_rows + r) * x.cols : nullptr;
      const T* src0 = &x.data[(static_cast<std::size_t>(c) * x.rows + r * window) * x.cols];
      std::copy(src0, src0 + x.cols, dst);
      for (int k = 1; k < window; ++k) {
        const T* src = src0 + static_cast<std::size_t>(k) * x.cols;
        for (int t = 0; t < x.cols; ++t) {
          if (src[t] > dst[t]) {
            dst[t] = src[t];
            if (am) am[t] = static_cast<std::uint8_t>(k);
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor3<T> freq_max_pool_backward(const Tensor3<T>& dy, int window,
                                  const std::vector<std::uint8_t>& argmax, int input_rows) {
  Tensor3<T> dx(dy.channels, input_rows, dy.cols);
  for (int c = 0; c < dy.channels; ++c) {
    for (int r = 0; r < dy.rows; ++r) {
      const std::size_t base = (static_cast<std::size_t>(c) * dy.rows + r) * dy.cols;
      for (int t = 0; t < dy.cols; ++t) {
        const int k = argmax[base + t];
        dx.at(c, r * window + k, t) += dy.data[base + t];
      }
    }
  }
  return dx;
}

template <typename T>
Sequence<T> lstm_forward(const Sequence<T>& x, const LstmWeights<T>& w, bool reverse,
                         LstmCache<T>* cache) {
  const int h = w.hidden, d = w.input_size;
  const auto nt = static_cast<int>(x.cols());
  if (x.rows() != d) throw std::invalid_argument("lstm: input size mismatch");
  ConstMatrixMap<T> w_ih(w.w_ih.data(), 4 * h, d);
  ConstMatrixMap<T> w_hh(w.w_hh.data(), 4 * h, h);
  ConstVectorMap<T> bias(w.bias.data(), 4 * h);

  Sequence<T> pre = w_ih * x;
  pre.colwise() += bias;
  Sequence<T> out(h, nt);
  Eigen::Matrix<T, Eigen::Dynamic, 1> hs = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> cs = hs;
  Eigen::Matrix<T, Eigen::Dynamic, 1> a(4 * h);
  if (cache) {
    cache->gates.resize(4 * h, nt);
    cache->cell.resize(h, nt);
    cache->hidden.resize(h, nt);
  }
  for (int s = 0; s < nt; ++s) {
    const int t = reverse ? nt - 1 - s : s;
    a.noalias() = pre.col(t) + w_hh * hs;
    for (int j = 0; j < h; ++j) {
      const T ig = sigmoid(a[j]);
      const T fg = sigmoid(a[h + j]);
      const T gg = std::tanh(a[2 * h + j]);
      const T og = sigmoid(a[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
      a[j] = ig;
      a[h + j] = fg;
      a[2 * h + j] = gg;
      a[3 * h + j] = og;
    }
    out.col(t) = hs;
    if (cache) {
      cache->gates.col(s) = a;
      cache->cell.col(s) = cs;
      cache->hidden.col(s) = hs;
    }
  }
  return out;
}

template <typename T>
Sequence<T> lstm_backward(const Sequence<T>& x, const LstmWeights<T>& w, bool reverse,
                          const LstmCache<T>& cache, const Sequence<T>& dh,
                          const LstmGrads<T>& grads) {
  const int h = w.hidden, d = w.input_size;
  const auto nt = static_cast<int>(x.cols());
  ConstMatrixMap<T> w_ih(w.w_ih.data(), 4 * h, d);
  ConstMatrixMap<T> w_hh(w.w_hh.data(), 4 * h, h);
  MatrixMap<T> dw_ih(grads.w_ih.data(), 4 * h, d);
  MatrixMap<T> dw_hh(grads.w_hh.data(), 4 * h, h);
  VectorMap<T> db(grads.bias.data(), 4 * h);

  Sequence<T> dpre(4 * h, nt);
  Eigen::Matrix<T, Eigen::Dynamic, 1> dh_next = Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(h);
  Eigen::Matrix<T, Eigen::Dynamic, 1> dc_next = dh_next;
  Eigen::Matrix<T, Eigen::Dynamic, 1> da(4 * h);
  RowMatrix<T> dw_hh_local = RowMatrix<T>::Zero(4 * h, h);
  for (int s = nt - 1; s >= 0; --s) {
    const int t = reverse ? nt - 1 - s : s;
    for (int j = 0; j < h; ++j) {
      const T ig = cache.gates(j, s), fg = cache.gates(h + j, s);
      const T gg = cache.gates(2 * h + j, s), og = cache.gates(3 * h + j, s);
      const T c = cache.cell(j, s);
      const T c_prev = s > 0 ? cache.cell(j, s - 1) : T(0);
      const T tc = std::tanh(c);
      const T dhj = dh(j, t) + dh_next[j];
      const T dc = dhj * og * (T(1) - tc * tc) + dc_next[j];
      da[j] = dc * gg * ig * (T(1) - ig);
      da[h + j] = dc * c_prev * fg * (T(1) - fg);
      da[2 * h + j] = dc * ig * (T(1) - gg * gg);
      da[3 * h + j] = dhj * tc * og * (T(1) - og);
      dc_next[j] = dc * fg;
    }
    dpre.col(t) = da;
    if (s > 0) dw_hh_local.noalias() += da * cache.hidden.col(s - 1).transpose();
    dh_next.noalias() = w_hh.transpose() * da;
  }
  dw_hh += dw_hh_local;
  dw_ih.noalias() += dpre * x.transpose();
  db += dpre.rowwise().sum();
  return w_ih.transpose() * dpre;
}

#define PRIMADNN_INSTANTIATE_LAYERS(T)                                                           \
  template void im2col<T>(const Tensor3<T>&, int, int, RowMatrix<T>&);                           \
  template void col2im_add<T>(const RowMatrix<T>&, int, int, Tensor3<T>&);                       \
  template Tensor3<T> conv2d_forward<T>(const Tensor3<T>&, std::span<const T>,                   \
                                        std::span<const T>, const ConvGeometry&);                \
  template void conv2d_backward<T>(const Tensor3<T>&, std::span<const T>, const ConvGeometry&,   \
                                   const Tensor3<T>&, std::span<T>, std::span<T>, Tensor3<T>*);  \
  template std::vector<T> normalize_planes_in_place<T>(Tensor3<T>&, T);                          \
  template std::vector<T> normalize_batch_in_place<T>(std::span<Tensor3<T>* const>, T,           \
                                                      std::vector<T>*, std::vector<T>*);         \
  template void normalize_fixed_in_place<T>(Tensor3<T>&, std::span<const T>, std::span<const T>, \
                                            T);                                                  \
  template void normalize_planes_backward<T>(const Tensor3<T>&, std::span<const T>,              \
                                             Tensor3<T>&);                                       \
  template void normalize_batch_backward<T>(std::span<const Tensor3<T>* const>,                  \
                                            std::span<const T>, std::span<Tensor3<T>* const>);   \
  template Tensor3<T> instance_norm_forward<T>(const Tensor3<T>&, std::span<const T>,            \
                                               std::span<const T>, T, InstanceNormCache<T>*);    \
  template Tensor3<T> instance_norm_backward<T>(const InstanceNormCache<T>&,                     \
                                                std::span<const T>, const Tensor3<T>&,           \
                                                std::span<T>, std::span<T>);                     \
  template void se_excitation<T>(const Tensor3<T>&, const SeWeights<T>&, const SeGeometry&,      \
                                 SeCache<T>&);                                                   \
  template Tensor3<T> se_forward<T>(const Tensor3<T>&, const SeWeights<T>&, const SeGeometry&,   \
                                    SeCache<T>*);                                                \
  template Tensor3<T> se_backward<T>(const Tensor3<T>&, const SeCache<T>&, const SeWeights<T>&,  \
                                     const SeGeometry&, const Tensor3<T>&, const SeGrads<T>&);   \
  template Tensor3<T> freq_max_pool<T>(const Tensor3<T>&, int, std::vector<std::uint8_t>*);      \
  template Tensor3<T> freq_max_pool_backward<T>(const Tensor3<T>&, int,                          \
                                                const std::vector<std::uint8_t>&, int);          \
  template Sequence<T> lstm_forward<T>(const Sequence<T>&, const LstmWeights<T>&, bool,          \
                                       LstmCache<T>*);                                           \
  template Sequence<T> lstm_backward<T>(const Sequence<T>&, const LstmWeights<T>&, bool,         \
                                        const LstmCache<T>&, const Sequence<T>&,                 \
                                        const LstmGrads<T>&);

PRIMADNN_INSTANTIATE_LAYERS(float)
PRIMADNN_INSTANTIATE_LAYERS(double)

}  // namespace primadnn
