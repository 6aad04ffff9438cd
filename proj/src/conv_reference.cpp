#include "tmsr/conv.hpp"
#include "tmsr/error.hpp"

namespace tmsr::reference {
namespace {

float weight_at(const ConvView& p, int oc, int ic, int ky, int kx) {
  const int per = p.shape.depthwise ? 1 : p.shape.in_channels;
  const int k = p.shape.depthwise ? 0 : ic;
  return p.weights[((static_cast<std::size_t>(oc) * per + k) * p.shape.kernel_h + ky) *
                       p.shape.kernel_w +
                   kx];
}

bool connects(const ConvView& p, int oc, int ic) { return !p.shape.depthwise || oc == ic; }

void check(const Tensor& input, const ConvView& p) {
  p.shape.validate();
  if (input.c() != p.shape.in_channels) {
    throw Error(ErrorKind::ShapeMismatch, "reference conv: input channels differ");
  }
  if (p.weights.size() != p.shape.weight_count() || p.bias.size() != p.shape.bias_count()) {
    throw Error(ErrorKind::ShapeMismatch, "reference conv: parameter length mismatch");
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvView& p) {
  check(input, p);
  const ConvShape& cs = p.shape;
  const int ph = cs.kernel_h / 2, pw = cs.kernel_w / 2;
  Tensor out({input.n(), cs.out_channels, input.h(), input.w()});
  for (int b = 0; b < input.n(); ++b)
    for (int oc = 0; oc < cs.out_channels; ++oc)
      for (int y = 0; y < input.h(); ++y)
        for (int x = 0; x < input.w(); ++x) {
          double acc = 0.0;
          for (int ic = 0; ic < cs.in_channels; ++ic) {
            if (!connects(p, oc, ic)) continue;
            for (int ky = 0; ky < cs.kernel_h; ++ky)
              for (int kx = 0; kx < cs.kernel_w; ++kx) {
                const int iy = y + ky - ph, ix = x + kx - pw;
                if (iy < 0 || iy >= input.h() || ix < 0 || ix >= input.w()) continue;
                acc += static_cast<double>(weight_at(p, oc, ic, ky, kx)) * input.at(b, ic, iy, ix);
              }
          }
          out.at(b, oc, y, x) = static_cast<float>(acc + p.bias[oc]);
        }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvView& p, const Tensor& grad_out) {
  check(input, p);
  const ConvShape& cs = p.shape;
  require_same_shape(grad_out.shape(), {input.n(), cs.out_channels, input.h(), input.w()},
                     "reference conv grad_out");
  const int ph = cs.kernel_h / 2, pw = cs.kernel_w / 2;
  const int n = input.n(), h = input.h(), w = input.w();
  ConvGrads g{Tensor(input.shape()), Tensor(cs.weight_shape()),
              std::vector<float>(cs.bias_count())};

  for (int oc = 0; oc < cs.out_channels; ++oc) {
    double s = 0.0;
    for (int b = 0; b < n; ++b)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) s += grad_out.at(b, oc, y, x);
    g.grad_bias[oc] = static_cast<float>(s);
  }

  for (int oc = 0; oc < cs.out_channels; ++oc)
    for (int ic = 0; ic < cs.in_channels; ++ic) {
      if (!connects(p, oc, ic)) continue;
      const int k = cs.depthwise ? 0 : ic;
      for (int ky = 0; ky < cs.kernel_h; ++ky)
        for (int kx = 0; kx < cs.kernel_w; ++kx) {
          double s = 0.0;
          for (int b = 0; b < n; ++b)
            for (int y = 0; y < h; ++y)
              for (int x = 0; x < w; ++x) {
                const int iy = y + ky - ph, ix = x + kx - pw;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                s += static_cast<double>(grad_out.at(b, oc, y, x)) * input.at(b, ic, iy, ix);
              }
          g.grad_weights.at(oc, k, ky, kx) = static_cast<float>(s);
        }
    }

  for (int b = 0; b < n; ++b)
    for (int ic = 0; ic < cs.in_channels; ++ic)
      for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
          double s = 0.0;
          for (int oc = 0; oc < cs.out_channels; ++oc) {
            if (!connects(p, oc, ic)) continue;
            for (int ky = 0; ky < cs.kernel_h; ++ky)
              for (int kx = 0; kx < cs.kernel_w; ++kx) {
                const int y = iy - (ky - ph), x = ix - (kx - pw);
                if (y < 0 || y >= h || x < 0 || x >= w) continue;
                s += static_cast<double>(weight_at(p, oc, ic, ky, kx)) * grad_out.at(b, oc, y, x);
              }
          }
          g.grad_input.at(b, ic, iy, ix) = static_cast<float>(s);
        }
  return g;
}

}  // namespace tmsr::reference
