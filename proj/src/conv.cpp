#include "tmsr/conv.hpp"

#include <algorithm>
#include <string>

#include "tmsr/error.hpp"
#include "tmsr/parallel.hpp"

namespace tmsr {

Shape ConvShape::weight_shape() const {
  return {out_channels, depthwise ? 1 : in_channels, kernel_h, kernel_w};
}

void ConvShape::validate() const {
  if (in_channels < 1 || out_channels < 1) {
    throw Error(ErrorKind::InvalidArgument, "conv channel counts must be positive");
  }
  if (kernel_h < 1 || kernel_w < 1 || kernel_h % 2 == 0 || kernel_w % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument,
                "conv kernel must be odd in each axis, got " + std::to_string(kernel_h) + "x" +
                    std::to_string(kernel_w));
  }
  if (depthwise && in_channels != out_channels) {
    throw Error(ErrorKind::InvalidArgument, "depthwise conv requires in_channels == out_channels");
  }
}

ConvParams::ConvParams(ConvShape s) : shape(s), weights(s.weight_shape()), bias(s.bias_count()) {
  shape.validate();
}

namespace {

void check_params(const ConvView& p) {
  p.shape.validate();
  if (p.weights.size() != p.shape.weight_count()) {
    throw Error(ErrorKind::ShapeMismatch,
                "conv weights: expected " + std::to_string(p.shape.weight_count()) +
                    " values, got " + std::to_string(p.weights.size()));
  }
  if (p.bias.size() != p.shape.bias_count()) {
    throw Error(ErrorKind::ShapeMismatch,
                "conv bias: expected " + std::to_string(p.shape.bias_count()) + " values, got " +
                    std::to_string(p.bias.size()));
  }
}

void check_input(const Tensor& input, const ConvView& p) {
  check_params(p);
  if (input.c() != p.shape.in_channels) {
    throw Error(ErrorKind::ShapeMismatch,
                "conv input channels: expected " + std::to_string(p.shape.in_channels) +
                    ", got " + std::to_string(input.c()));
  }
}

// Valid output range [lo, hi) along one axis for a tap displaced by `d`.
inline void tap_range(int extent, int d, int& lo, int& hi) {
  lo = std::max(0, -d);
  hi = std::min(extent, extent - d);
}

}  // namespace

void conv2d_forward_into(const Tensor& input, const ConvView& p, Tensor& out) {
  check_input(input, p);
  const ConvShape& cs = p.shape;
  const int n = input.n(), h = input.h(), w = input.w();
  const Shape out_shape{n, cs.out_channels, h, w};
  if (out.shape() != out_shape) out = Tensor(out_shape);

  const int ph = cs.kernel_h / 2, pw = cs.kernel_w / 2;
  const int in_per_out = cs.depthwise ? 1 : cs.in_channels;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const long tasks = static_cast<long>(n) * cs.out_channels;
  const int threads = thread_count();

#pragma omp parallel num_threads(threads) if (threads > 1 && tasks > 1)
  {
    std::vector<double> acc(hw);
#pragma omp for schedule(static)
    for (long task = 0; task < tasks; ++task) {
      const int b = static_cast<int>(task / cs.out_channels);
      const int oc = static_cast<int>(task % cs.out_channels);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = 0; k < in_per_out; ++k) {
        const int ic = cs.depthwise ? oc : k;
        const float* src = input.plane(b, ic).data();
        const float* wk = p.weights.data() +
                          (static_cast<std::size_t>(oc) * in_per_out + k) * cs.kernel_h * cs.kernel_w;
        for (int ky = 0; ky < cs.kernel_h; ++ky) {
          const int dy = ky - ph;
          int y0, y1;
          tap_range(h, dy, y0, y1);
          for (int kx = 0; kx < cs.kernel_w; ++kx) {
            const int dx = kx - pw;
            int x0, x1;
            tap_range(w, dx, x0, x1);
            const double wv = wk[ky * cs.kernel_w + kx];
            for (int y = y0; y < y1; ++y) {
              const float* row = src + static_cast<std::size_t>(y + dy) * w + dx;
              double* dst = acc.data() + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) dst[x] += wv * row[x];
            }
          }
        }
      }
      float* dst = out.plane(b, oc).data();
      const double bias = p.bias[oc];
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<float>(acc[i] + bias);
    }
  }
}

Tensor conv2d_forward(const Tensor& input, const ConvView& params) {
  Tensor out;
  conv2d_forward_into(input, params, out);
  return out;
}

void conv2d_backward_into(const Tensor& input, const ConvView& p, const Tensor& grad_out,
                          Tensor* grad_input, ConvGradView grads) {
  check_input(input, p);
  const ConvShape& cs = p.shape;
  const int n = input.n(), h = input.h(), w = input.w();
  require_same_shape(grad_out.shape(), Shape{n, cs.out_channels, h, w}, "conv grad_out");
  if (grads.weights.size() != cs.weight_count() || grads.bias.size() != cs.bias_count()) {
    throw Error(ErrorKind::ShapeMismatch, "conv gradient buffers do not match parameter shape");
  }

  const int ph = cs.kernel_h / 2, pw = cs.kernel_w / 2;
  const int in_per_out = cs.depthwise ? 1 : cs.in_channels;
  const int kk = cs.kernel_h * cs.kernel_w;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const int threads = thread_count();

  // Weight and bias gradients: one task per output channel, reducing over the
  // batch in a fixed order.
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int oc = 0; oc < cs.out_channels; ++oc) {
    double bsum = 0.0;
    for (int b = 0; b < n; ++b) {
      const float* go = grad_out.plane(b, oc).data();
      for (std::size_t i = 0; i < hw; ++i) bsum += go[i];
    }
    grads.bias[oc] = static_cast<float>(bsum);

    for (int k = 0; k < in_per_out; ++k) {
      const int ic = cs.depthwise ? oc : k;
      float* gw = grads.weights.data() + (static_cast<std::size_t>(oc) * in_per_out + k) * kk;
      for (int ky = 0; ky < cs.kernel_h; ++ky) {
        const int dy = ky - ph;
        int y0, y1;
        tap_range(h, dy, y0, y1);
        for (int kx = 0; kx < cs.kernel_w; ++kx) {
          const int dx = kx - pw;
          int x0, x1;
          tap_range(w, dx, x0, x1);
          double s = 0.0;
          for (int b = 0; b < n; ++b) {
            const float* go = grad_out.plane(b, oc).data();
            const float* src = input.plane(b, ic).data();
            for (int y = y0; y < y1; ++y) {
              const float* grow = go + static_cast<std::size_t>(y) * w;
              const float* irow = src + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) s += static_cast<double>(grow[x]) * irow[x];
            }
          }
          gw[ky * cs.kernel_w + kx] = static_cast<float>(s);
        }
      }
    }
  }

  if (grad_input == nullptr) return;
  if (grad_input->shape() != input.shape()) *grad_input = Tensor(input.shape());

  // Input gradient: scatter each output gradient back through the taps, one
  // task per (sample, input channel).
  const long tasks = static_cast<long>(n) * cs.in_channels;
#pragma omp parallel num_threads(threads) if (threads > 1 && tasks > 1)
  {
    std::vector<double> acc(hw);
#pragma omp for schedule(static)
    for (long task = 0; task < tasks; ++task) {
      const int b = static_cast<int>(task / cs.in_channels);
      const int ic = static_cast<int>(task % cs.in_channels);
      std::fill(acc.begin(), acc.end(), 0.0);
      const int oc_begin = cs.depthwise ? ic : 0;
      const int oc_end = cs.depthwise ? ic + 1 : cs.out_channels;
      for (int oc = oc_begin; oc < oc_end; ++oc) {
        const int k = cs.depthwise ? 0 : ic;
        const float* wk = p.weights.data() + (static_cast<std::size_t>(oc) * in_per_out + k) * kk;
        const float* go = grad_out.plane(b, oc).data();
        for (int ky = 0; ky < cs.kernel_h; ++ky) {
          const int dy = ky - ph;
          int y0, y1;
          tap_range(h, dy, y0, y1);
          for (int kx = 0; kx < cs.kernel_w; ++kx) {
            const int dx = kx - pw;
            int x0, x1;
            tap_range(w, dx, x0, x1);
            const double wv = wk[ky * cs.kernel_w + kx];
            for (int y = y0; y < y1; ++y) {
              const float* grow = go + static_cast<std::size_t>(y) * w;
              double* dst = acc.data() + static_cast<std::size_t>(y + dy) * w + dx;
              for (int x = x0; x < x1; ++x) dst[x] += wv * grow[x];
            }
          }
        }
      }
      float* gi = grad_input->plane(b, ic).data();
      for (std::size_t i = 0; i < hw; ++i) gi[i] = static_cast<float>(acc[i]);
    }
  }
}

ConvGrads conv2d_backward(const Tensor& input, const ConvView& params, const Tensor& grad_out) {
  ConvGrads g{Tensor(input.shape()), Tensor(params.shape.weight_shape()),
              std::vector<float>(params.shape.bias_count())};
  conv2d_backward_into(input, params, grad_out, &g.grad_input,
                       {g.grad_weights.data(), g.grad_bias});
  return g;
}

}  // namespace tmsr
