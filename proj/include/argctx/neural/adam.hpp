#pragma once

#include <cmath>
#include <cstddef>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  ParameterSet m;
  ParameterSet v;

  static AdamState for_params(const ParameterSet& params) { return {0, params.zeros_like(), params.zeros_like()}; }

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. Non-trainable blocks are left untouched.
inline void optimizer_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, const AdamConfig& cfg) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw ConfigError("optimizer_step: parameter, gradient and state shapes differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.block(i).trainable) continue;
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    params[i].array() -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
  }
}

}  // namespace argctx::nn
