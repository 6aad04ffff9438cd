#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tmsr {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, kept in double.
struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update over a flat parameter vector.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace tmsr
