// Adam optimizer with bias correction (Kingma & Ba defaults).
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deepf0/errors.hpp"

namespace deepf0 {

template <typename T>
struct AdamConfig {
  T lr = static_cast<T>(2e-4);
  T beta1 = static_cast<T>(0.9);
  T beta2 = static_cast<T>(0.999);
  T epsilon = static_cast<T>(1e-8);
};

// Moment accumulators for one parameter tensor.
template <typename T>
struct AdamState {
  AdamConfig<T> cfg;
  long step_count = 0;
  std::vector<T> first_moment;
  std::vector<T> second_moment;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamConfig<T> c = {})
      : cfg(c), first_moment(n, T(0)), second_moment(n, T(0)) {}
};

// One Adam update:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(std::vector<T>& params, const std::vector<T>& grads,
               AdamState<T>& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: size mismatch");
  }
  state.step_count += 1;
  adam_apply(params.data(), grads.data(), state.first_moment.data(),
             state.second_moment.data(), params.size(), state.cfg,
             state.step_count);
}

// Core update over raw arrays; step_count is managed by the caller so that
// a model made of many tensors advances its clock once per optimizer step.
template <typename T>
void adam_apply(T* p, const T* g, T* m, T* v, std::size_t n,
                const AdamConfig<T>& cfg, long step_count) {
  const T bc1 = T(1) - std::pow(cfg.beta1, static_cast<T>(step_count));
  const T bc2 = T(1) - std::pow(cfg.beta2, static_cast<T>(step_count));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(g[i]))) {
      throw NumericError("adam: non-finite gradient at index " +
                         std::to_string(i));
    }
    m[i] = cfg.beta1 * m[i] + (T(1) - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (T(1) - cfg.beta2) * g[i] * g[i];
    T m_hat = m[i] / bc1;
    T v_hat = v[i] / bc2;
    p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace deepf0
