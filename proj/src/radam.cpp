#include "primadnn/radam.hpp"

#include <cmath>
#include <stdexcept>

namespace primadnn {

double radam_rho_inf(double beta2) { return 2.0 / (1.0 - beta2) - 1.0; }

double radam_rho(long t, double beta2) {
  const double bt = std::pow(beta2, static_cast<double>(t));
  return radam_rho_inf(beta2) - 2.0 * static_cast<double>(t) * bt / (1.0 - bt);
}

double radam_rectification(long t, double beta2) {
  const double rho_inf = radam_rho_inf(beta2);
  const double rho = radam_rho(t, beta2);
  return std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) /
                   ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
}

template <typename T>
void radam_step(std::span<T> params, std::span<const T> grads, RAdamState& state,
                const RAdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("radam: gradient size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  const long t = ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double rho = radam_rho(t, b2);
  const bool adaptive = !cfg.rectify || rho > 4.0;
  const double r = cfg.rectify && adaptive ? radam_rectification(t, b2) : 1.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.m[i];
    double& v = state.v[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = m / bc1;
    double update;
    if (adaptive) {
      const double v_hat = std::sqrt(v / bc2);
      update = cfg.learning_rate * r * m_hat / (v_hat + cfg.eps);
    } else {
      update = cfg.learning_rate * m_hat;
    }
    params[i] = static_cast<T>(params[i] - update);
  }
}

template void radam_step<float>(std::span<float>, std::span<const float>, RAdamState&,
                                const RAdamConfig&);
template void radam_step<double>(std::span<double>, std::span<const double>, RAdamState&,
                                 const RAdamConfig&);

}  // namespace primadnn
