#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmsr/model.hpp"

namespace tmsr::reference {

struct Forward64 {
  std::vector<double> output;  // (h * scale) x (w * scale), row-major
  std::uint64_t region = 0;    // same fingerprint as activation_region()
};

// Straight-line double-precision evaluation of the network for a single
// h x w input plane. Shares only the parameter manifest with TmsrModel.
Forward64 model_forward(const ModelConfig& config, std::span<const double> params,
                        std::span<const double> input, int h, int w);

}  // namespace tmsr::reference
