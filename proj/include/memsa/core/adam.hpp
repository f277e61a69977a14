#pragma once

#include <cmath>
#include <cstdint>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"

namespace memsa {

/// Adam hyperparameters. `decay` shrinks the step size as lr / (1 + decay * t),
/// where t counts the updates already applied.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 1e-6;
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const Matrix& param) {
    return AdamState{Matrix(param.rows(), param.cols()), Matrix(param.rows(), param.cols()), 0};
  }
};

/// In-place update used by the training loop.
inline void adam_update(Matrix& param, const Matrix& grad, AdamState& state, const AdamConfig& cfg) {
  param.require_same_shape(grad, "adam_step: param/grad");
  param.require_same_shape(state.first_moment, "adam_step: param/first moment");
  param.require_same_shape(state.second_moment, "adam_step: param/second moment");

  const double lr_t = cfg.lr / (1.0 + cfg.decay * static_cast<double>(state.step));
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  auto p = param.data();
  auto g = grad.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    p[k] -= lr_t * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

struct AdamResult {
  Matrix param;
  AdamState state;
};

/// Pure form: returns the updated parameter and state, leaving inputs untouched.
inline AdamResult adam_step(const Matrix& param, const Matrix& grad, const AdamState& state,
                            const AdamConfig& cfg) {
  AdamResult out{param, state};
  adam_update(out.param, grad, out.state, cfg);
  return out;
}

}  // namespace memsa
