#pragma once

#include <span>
#include <vector>

#include "tmsr/tensor.hpp"

namespace tmsr {

// Learnable negative slope: one alpha per channel, or a single alpha shared by
// every channel.
struct PReLUParams {
  std::vector<float> alpha;
};

struct PReLUGrads {
  Tensor grad_input;
  std::vector<float> grad_alpha;
};

// x if x > 0, alpha * x otherwise (x == 0 takes the alpha branch).
Tensor prelu_forward(const Tensor& input, std::span<const float> alpha);
PReLUGrads prelu_backward(const Tensor& input, std::span<const float> alpha,
                          const Tensor& grad_out);

void prelu_forward_into(const Tensor& input, std::span<const float> alpha, Tensor& out);
void prelu_backward_into(const Tensor& input, std::span<const float> alpha,
                         const Tensor& grad_out, Tensor& grad_input,
                         std::span<float> grad_alpha);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

}  // namespace tmsr
