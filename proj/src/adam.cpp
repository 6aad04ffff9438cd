#include "tmsr/adam.hpp"

#include <cmath>
#include <string>

#include "tmsr/error.hpp"

namespace tmsr {

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "adam: params/grads/state lengths differ (" + std::to_string(params.size()) + ", " +
                    std::to_string(grads.size()) + ", " + std::to_string(state.m.size()) + ")");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<float>(params[i] - config.lr * m_hat / (std::sqrt(v_hat) + config.eps));
  }
}

}  // namespace tmsr
