#include "primadnn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace primadnn {

namespace {

bool clamped(double p) { return p < kProbabilityClamp || p > 1.0 - kProbabilityClamp; }
double clamp_p(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

void check_shapes(Eigen::Index ar, Eigen::Index ac, const LabelRoll& labels) {
  if (ar != labels.rows() || ac != labels.cols()) {
    throw std::invalid_argument("activation and label rolls differ in shape");
  }
}

}  // namespace

double focal_alpha_t(bool positive, const FocalLossParams& p) {
  if (p.alpha_mode == AlphaMode::kConstant) return p.alpha;
  return positive ? p.alpha : 1.0 - p.alpha;
}

double focal_cell(double p, bool positive, const FocalLossParams& params) {
  const double q = clamp_p(p);
  const double pt = positive ? q : 1.0 - q;
  return -focal_alpha_t(positive, params) * std::pow(1.0 - pt, params.gamma) * std::log(pt);
}

double focal_cell_grad(double p, bool positive, const FocalLossParams& params) {
  if (clamped(p)) return 0.0;
  const double pt = positive ? p : 1.0 - p;
  const double a = focal_alpha_t(positive, params);
  const double g = params.gamma;
  const double one_minus = 1.0 - pt;
  double d_pt = -a * std::pow(one_minus, g) / pt;
  if (g != 0.0) d_pt += a * g * std::pow(one_minus, g - 1.0) * std::log(pt);
  return positive ? d_pt : -d_pt;
}

double bce_cell(double p, bool positive) {
  const double q = clamp_p(p);
  return positive ? -std::log(q) : -std::log(1.0 - q);
}

double bce_cell_grad(double p, bool positive) {
  if (clamped(p)) return 0.0;
  return positive ? -1.0 / p : 1.0 / (1.0 - p);
}

template <typename T>
double focal_loss(const RowMatrix<T>& activations, const LabelRoll& labels,
                  const FocalLossParams& params, RowMatrix<T>* grad, double grad_scale) {
  check_shapes(activations.rows(), activations.cols(), labels);
  const double n = static_cast<double>(activations.size());
  if (grad) grad->resize(activations.rows(), activations.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < activations.rows(); ++r) {
    for (Eigen::Index c = 0; c < activations.cols(); ++c) {
      const double p = activations(r, c);
      const bool y = labels(r, c) != 0;
      sum += focal_cell(p, y, params);
      if (grad) (*grad)(r, c) = static_cast<T>(focal_cell_grad(p, y, params) * grad_scale / n);
    }
  }
  return sum / n;
}

template <typename T>
double bce_loss(const RowMatrix<T>& activations, const LabelRoll& labels, RowMatrix<T>* grad,
                double grad_scale) {
  check_shapes(activations.rows(), activations.cols(), labels);
  const double n = static_cast<double>(activations.size());
  if (grad) grad->resize(activations.rows(), activations.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < activations.rows(); ++r) {
    for (Eigen::Index c = 0; c < activations.cols(); ++c) {
      const double p = activations(r, c);
      const bool y = labels(r, c) != 0;
      sum += bce_cell(p, y);
      if (grad) (*grad)(r, c) = static_cast<T>(bce_cell_grad(p, y) * grad_scale / n);
    }
  }
  return sum / n;
}

template double focal_loss<float>(const RowMatrix<float>&, const LabelRoll&,
                                  const FocalLossParams&, RowMatrix<float>*, double);
template double focal_loss<double>(const RowMatrix<double>&, const LabelRoll&,
                                   const FocalLossParams&, RowMatrix<double>*, double);
template double bce_loss<float>(const RowMatrix<float>&, const LabelRoll&, RowMatrix<float>*,
                                double);
template double bce_loss<double>(const RowMatrix<double>&, const LabelRoll&, RowMatrix<double>*,
                                 double);

}  // namespace primadnn
