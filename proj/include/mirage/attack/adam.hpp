#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mirage/errors.hpp"

namespace mirage::attack {

/// First/second moment accumulators for Adam. `step` counts applied updates.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int step = 0;

  static AdamState zeros(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

/// One bias-corrected Adam update. Advances `state` in place and returns the
/// additive delta: delta[i] = -alpha * m_hat[i] / (sqrt(v_hat[i]) + eps).
inline std::vector<double> adam_step(AdamState& state, std::span<const double> gradient,
                                     double alpha, double beta1, double beta2,
                                     double epsilon) {
  if (state.m.size() != gradient.size() || state.v.size() != gradient.size()) {
    throw ShapeError("adam state holds " + std::to_string(state.m.size()) +
                     " moments, gradient has " + std::to_string(gradient.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, state.step);
  const double bc2 = 1.0 - std::pow(beta2, state.step);

  std::vector<double> delta(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    delta[i] = -alpha * m_hat / (std::sqrt(v_hat) + epsilon);
  }
  return delta;
}

}  // namespace mirage::attack
