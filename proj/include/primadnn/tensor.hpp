#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace primadnn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using VectorMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

// Eigen picks its vectorized peeling from the runtime address, so storage
// that feeds Eigen maps is over-aligned to keep results independent of
// where the allocator happened to put it.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// channels x rows x cols, row-major. Rows are frequency, cols are time.
template <typename T>
struct Tensor3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  AlignedVector<T> data;

  Tensor3() = default;
  Tensor3(int c, int r, int t, T fill = T(0))
      : channels(c), rows(r), cols(t), data(static_cast<std::size_t>(c) * r * t, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t size() const { return data.size(); }

  T& at(int c, int r, int t) { return data[(static_cast<std::size_t>(c) * rows + r) * cols + t]; }
  T at(int c, int r, int t) const {
    return data[(static_cast<std::size_t>(c) * rows + r) * cols + t];
  }
  std::span<T> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {data.data() + c * plane(), plane()}; }

  /// channels x (rows * cols) view.
  MatrixMap<T> matrix() { return {data.data(), channels, static_cast<Eigen::Index>(plane())}; }
  ConstMatrixMap<T> matrix() const {
    return {data.data(), channels, static_cast<Eigen::Index>(plane())};
  }
  bool same_shape(const Tensor3& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

}  // namespace primadnn
