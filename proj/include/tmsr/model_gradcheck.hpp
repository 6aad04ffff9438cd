#pragma once

#include <cstdint>

#include "tmsr/gradcheck.hpp"
#include "tmsr/model.hpp"

namespace tmsr {

struct ModelGradCheckOptions {
  int size = 16;  // LR patch edge
  std::uint64_t seed = 1;
  bool check_input = false;  // check d(loss)/d(input) instead of the parameters
  GradCheckOptions check{};
};

// End-to-end check of TmsrModel::backward: a randomly initialized model with
// randomized biases and alphas, a random size x size input in [0, 1] and an
// MSE loss against a random target.
GradCheckReport check_model_gradients(const ModelConfig& config,
                                      const ModelGradCheckOptions& options = {});

}  // namespace tmsr
