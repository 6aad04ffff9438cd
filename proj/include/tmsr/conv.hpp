#pragma once

#include <span>
#include <vector>

#include "tmsr/tensor.hpp"

namespace tmsr {

// Geometry of a 2-D convolution. Padding is always zero "same" padding of
// kernel/2 on each side, so kernels must be odd in both axes.
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  bool depthwise = false;

  // (out, in or 1, kh, kw)
  Shape weight_shape() const;
  std::size_t weight_count() const { return weight_shape().numel(); }
  std::size_t bias_count() const { return static_cast<std::size_t>(out_channels); }
  std::size_t param_count() const { return weight_count() + bias_count(); }
  void validate() const;

  friend bool operator==(const ConvShape&, const ConvShape&) = default;
};

// Non-owning view of conv parameters; the model keeps all parameters in one
// flat buffer and hands views into it to the kernels.
struct ConvView {
  ConvShape shape;
  std::span<const float> weights;
  std::span<const float> bias;
};

struct ConvGradView {
  std::span<float> weights;
  std::span<float> bias;
};

// Owning parameters, convenient for standalone use.
struct ConvParams {
  ConvShape shape;
  Tensor weights;
  std::vector<float> bias;

  explicit ConvParams(ConvShape s);
  ConvView view() const { return {shape, weights.data(), bias}; }
};

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weights;
  std::vector<float> grad_bias;
};

// Cross-correlation with zero same-padding, accumulated in double.
Tensor conv2d_forward(const Tensor& input, const ConvView& params);
ConvGrads conv2d_backward(const Tensor& input, const ConvView& params, const Tensor& grad_out);

// In-place variants used by the model. `out` is resized as needed. A null
// `grad_input` skips the input gradient.
void conv2d_forward_into(const Tensor& input, const ConvView& params, Tensor& out);
void conv2d_backward_into(const Tensor& input, const ConvView& params, const Tensor& grad_out,
                          Tensor* grad_input, ConvGradView grads);

// Serial nested-loop implementations. They share no code with the kernels
// above and exist as the oracle for tests and the benchmark baseline.
namespace reference {

Tensor conv2d_forward(const Tensor& input, const ConvView& params);
ConvGrads conv2d_backward(const Tensor& input, const ConvView& params, const Tensor& grad_out);

}  // namespace reference

}  // namespace tmsr
