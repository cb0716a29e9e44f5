#pragma once

#include <span>
#include <vector>

namespace primadnn {

struct RAdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// When false every step uses the adaptive update with r_t = 1, which is
  /// Adam with bias correction.
  bool rectify = true;
};

struct RAdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// Length of the approximated simple moving average at infinity,
/// 2 / (1 - beta2) - 1.
double radam_rho_inf(double beta2);

/// rho_t = rho_inf - 2 t beta2^t / (1 - beta2^t).
double radam_rho(long t, double beta2);

/// Variance rectification term; only meaningful for rho_t > 4.
double radam_rectification(long t, double beta2);

/// One RAdam update. Increments state.step before computing the update, so
/// the first call uses t = 1.
template <typename T>
void radam_step(std::span<T> params, std::span<const T> grads, RAdamState& state,
                const RAdamConfig& cfg);

}  // namespace primadnn
