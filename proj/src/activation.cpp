#include "tmsr/activation.hpp"

#include <string>

#include "tmsr/error.hpp"
#include "tmsr/parallel.hpp"

namespace tmsr {
namespace {

void check_alpha(const Tensor& input, std::span<const float> alpha) {
  if (alpha.size() != 1 && alpha.size() != static_cast<std::size_t>(input.c())) {
    throw Error(ErrorKind::ShapeMismatch,
                "prelu alpha count " + std::to_string(alpha.size()) + " does not match " +
                    std::to_string(input.c()) + " channels");
  }
}

inline float alpha_for(std::span<const float> alpha, int c) {
  return alpha.size() == 1 ? alpha[0] : alpha[c];
}

}  // namespace

void prelu_forward_into(const Tensor& input, std::span<const float> alpha, Tensor& out) {
  check_alpha(input, alpha);
  if (out.shape() != input.shape()) out = Tensor(input.shape());
  for (int b = 0; b < input.n(); ++b)
    for (int c = 0; c < input.c(); ++c) {
      const float a = alpha_for(alpha, c);
      auto src = input.plane(b, c);
      auto dst = out.plane(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : a * src[i];
    }
}

Tensor prelu_forward(const Tensor& input, std::span<const float> alpha) {
  Tensor out;
  prelu_forward_into(input, alpha, out);
  return out;
}

void prelu_backward_into(const Tensor& input, std::span<const float> alpha,
                         const Tensor& grad_out, Tensor& grad_input,
                         std::span<float> grad_alpha) {
  check_alpha(input, alpha);
  require_same_shape(grad_out.shape(), input.shape(), "prelu grad_out");
  if (grad_alpha.size() != alpha.size()) {
    throw Error(ErrorKind::ShapeMismatch, "prelu grad_alpha length differs from alpha");
  }
  if (grad_input.shape() != input.shape()) grad_input = Tensor(input.shape());

  const int channels = input.c();
  std::vector<double> per_channel(channels, 0.0);
  const int threads = thread_count();

  // Per-channel tasks keep the alpha reduction order fixed (batch, then pixel).
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int c = 0; c < channels; ++c) {
    const float a = alpha_for(alpha, c);
    double acc = 0.0;
    for (int b = 0; b < input.n(); ++b) {
      auto x = input.plane(b, c);
      auto go = grad_out.plane(b, c);
      auto gi = grad_input.plane(b, c);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0f) {
          gi[i] = go[i];
        } else {
          gi[i] = a * go[i];
          acc += static_cast<double>(go[i]) * x[i];
        }
      }
    }
    per_channel[c] = acc;
  }

  if (grad_alpha.size() == 1) {
    double total = 0.0;
    for (double v : per_channel) total += v;
    grad_alpha[0] = static_cast<float>(total);
  } else {
    for (int c = 0; c < channels; ++c) grad_alpha[c] = static_cast<float>(per_channel[c]);
  }
}

PReLUGrads prelu_backward(const Tensor& input, std::span<const float> alpha,
                          const Tensor& grad_out) {
  PReLUGrads g{Tensor(input.shape()), std::vector<float>(alpha.size())};
  prelu_backward_into(input, alpha, grad_out, g.grad_input, g.grad_alpha);
  return g;
}

// Negative inputs produce 0 * x (signed zero), the same bits as alpha = 0 PReLU.
Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f * src[i];
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_same_shape(grad_out.shape(), input.shape(), "relu grad_out");
  Tensor gi(input.shape());
  auto x = input.data();
  auto go = grad_out.data();
  auto dst = gi.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > 0.0f ? go[i] : 0.0f * go[i];
  return gi;
}

}  // namespace tmsr
