#include "tmsr/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tmsr/error.hpp"

namespace tmsr {

double cubic_kernel(double x) {
  const double ax = std::fabs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

namespace {

// Taps and weights for every output sample along one axis.
struct Contributions {
  int taps = 0;
  std::vector<int> index;      // out_len * taps, already clamped
  std::vector<double> weight;  // out_len * taps, each row sums to 1
};

Contributions contributions(int in_len, int out_len, double scale, bool antialias) {
  const bool widen = antialias && scale < 1.0;
  const double kernel_width = widen ? 4.0 / scale : 4.0;
  Contributions c;
  c.taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  c.index.resize(static_cast<std::size_t>(out_len) * c.taps);
  c.weight.resize(static_cast<std::size_t>(out_len) * c.taps);
  for (int i = 0; i < out_len; ++i) {
    // 1-based MATLAB convention: u = x/scale + 0.5(1 - 1/scale).
    const double x = i + 1;
    const double u = x / scale + 0.5 * (1.0 - 1.0 / scale);
    const int left = static_cast<int>(std::floor(u - kernel_width / 2.0));
    double sum = 0.0;
    for (int t = 0; t < c.taps; ++t) {
      const int j = left + t;  // 1-based source index
      const double d = u - j;
      const double w = widen ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      c.index[static_cast<std::size_t>(i) * c.taps + t] = std::clamp(j - 1, 0, in_len - 1);
      c.weight[static_cast<std::size_t>(i) * c.taps + t] = w;
      sum += w;
    }
    for (int t = 0; t < c.taps; ++t) c.weight[static_cast<std::size_t>(i) * c.taps + t] /= sum;
  }
  return c;
}

// Resamples along rows (vertical) into a double buffer of width `w`.
std::vector<double> resize_vertical(const std::vector<double>& src, int w, int in_h, int out_h,
                                    double scale, bool antialias) {
  const Contributions c = contributions(in_h, out_h, scale, antialias);
  std::vector<double> out(static_cast<std::size_t>(w) * out_h, 0.0);
  for (int i = 0; i < out_h; ++i) {
    double* dst = &out[static_cast<std::size_t>(i) * w];
    for (int t = 0; t < c.taps; ++t) {
      const double wt = c.weight[static_cast<std::size_t>(i) * c.taps + t];
      if (wt == 0.0) continue;
      const double* row = &src[static_cast<std::size_t>(c.index[static_cast<std::size_t>(i) * c.taps + t]) * w];
      for (int x = 0; x < w; ++x) dst[x] += wt * row[x];
    }
  }
  return out;
}

std::vector<double> resize_horizontal(const std::vector<double>& src, int in_w, int h, int out_w,
                                      double scale, bool antialias) {
  const Contributions c = contributions(in_w, out_w, scale, antialias);
  std::vector<double> out(static_cast<std::size_t>(out_w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = &src[static_cast<std::size_t>(y) * in_w];
    double* dst = &out[static_cast<std::size_t>(y) * out_w];
    for (int i = 0; i < out_w; ++i) {
      double acc = 0.0;
      for (int t = 0; t < c.taps; ++t) {
        const std::size_t k = static_cast<std::size_t>(i) * c.taps + t;
        acc += c.weight[k] * row[c.index[k]];
      }
      dst[i] = acc;
    }
  }
  return out;
}

}  // namespace

ImagePlane bicubic_resize(const ImagePlane& plane, int out_w, int out_h, bool antialias) {
  if (out_w < 1 || out_h < 1) {
    throw Error(ErrorKind::InvalidArgument, "bicubic_resize: output dimensions must be >= 1");
  }
  if (plane.width < 1 || plane.height < 1) {
    throw Error(ErrorKind::InvalidArgument, "bicubic_resize: empty input plane");
  }
  const double sy = static_cast<double>(out_h) / plane.height;
  const double sx = static_cast<double>(out_w) / plane.width;

  std::vector<double> buf(plane.data.begin(), plane.data.end());
  if (sy <= sx) {
    buf = resize_vertical(buf, plane.width, plane.height, out_h, sy, antialias);
    buf = resize_horizontal(buf, plane.width, out_h, out_w, sx, antialias);
  } else {
    buf = resize_horizontal(buf, plane.width, plane.height, out_w, sx, antialias);
    buf = resize_vertical(buf, out_w, plane.height, out_h, sy, antialias);
  }

  ImagePlane out(out_w, out_h);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp(buf[i], 0.0, 255.0));
  }
  return out;
}

}  // namespace tmsr
