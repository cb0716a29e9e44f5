#pragma once

#include "primadnn/events.hpp"
#include "primadnn/tensor.hpp"

namespace primadnn {

/// How the focal-loss weight is applied. `kBalanced` weights positives by
/// alpha and negatives by 1 - alpha; `kConstant` uses alpha for every cell.
enum class AlphaMode { kBalanced, kConstant };

struct FocalLossParams {
  double alpha = 0.13;
  double gamma = 1.33;
  AlphaMode alpha_mode = AlphaMode::kBalanced;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Weight applied to a cell with the given label.
double focal_alpha_t(bool positive, const FocalLossParams& p);

/// -alpha_t (1 - p_t)^gamma ln(p_t) for one cell; p is clamped first.
double focal_cell(double p, bool positive, const FocalLossParams& params);
/// d focal_cell / d p (zero where the clamp is active).
double focal_cell_grad(double p, bool positive, const FocalLossParams& params);

double bce_cell(double p, bool positive);
double bce_cell_grad(double p, bool positive);

/// Mean focal loss over all cells. When `grad` is given it receives the
/// gradient of the mean with respect to the activations, times `grad_scale`.
template <typename T>
double focal_loss(const RowMatrix<T>& activations, const LabelRoll& labels,
                  const FocalLossParams& params, RowMatrix<T>* grad = nullptr,
                  double grad_scale = 1.0);

/// Mean binary cross-entropy with the same clamping and gradient contract.
template <typename T>
double bce_loss(const RowMatrix<T>& activations, const LabelRoll& labels,
                RowMatrix<T>* grad = nullptr, double grad_scale = 1.0);

enum class LossKind { kFocal, kBce };

template <typename T>
double compute_loss(LossKind kind, const RowMatrix<T>& activations, const LabelRoll& labels,
                    const FocalLossParams& params, RowMatrix<T>* grad = nullptr,
                    double grad_scale = 1.0) {
  return kind == LossKind::kFocal ? focal_loss(activations, labels, params, grad, grad_scale)
                                  : bce_loss(activations, labels, grad, grad_scale);
}

}  // namespace primadnn
