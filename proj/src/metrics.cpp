#include "tmsr/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tmsr/error.hpp"

namespace tmsr {
namespace {

void require_same_dims(const ImagePlane& x, const ImagePlane& y, const char* what) {
  if (x.width != y.width || x.height != y.height) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + ": dimension mismatch " + std::to_string(x.width) + "x" +
                    std::to_string(x.height) + " vs " + std::to_string(y.width) + "x" +
                    std::to_string(y.height));
  }
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(size);
  double sum = 0.0;
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable "valid" correlation with the 1-D window `g` along both axes.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * src[static_cast<std::size_t>(y) * w + x + t];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * tmp[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double mse(const ImagePlane& x, const ImagePlane& y) {
  require_same_dims(x, y, "mse");
  if (x.data.empty()) throw Error(ErrorKind::InvalidArgument, "mse: empty planes");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = static_cast<double>(x.data[i]) - y.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.data.size());
}

double psnr_from_mse(double m) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kMaxIntensity * kMaxIntensity / m);
}

double mse_from_psnr(double psnr_db) {
  return kMaxIntensity * kMaxIntensity / std::pow(10.0, psnr_db / 10.0);
}

double psnr(const ImagePlane& x, const ImagePlane& y) { return psnr_from_mse(mse(x, y)); }

SsimResult ssim_components(const ImagePlane& x, const ImagePlane& y, const SsimOptions& o) {
  require_same_dims(x, y, "ssim");
  if (x.width < o.window || x.height < o.window) {
    throw Error(ErrorKind::InvalidArgument, "ssim: image " + std::to_string(x.width) + "x" +
                                                std::to_string(x.height) + " smaller than " +
                                                std::to_string(o.window) + "x" +
                                                std::to_string(o.window) + " window");
  }
  const int w = x.width, h = x.height;
  const std::size_t n = x.data.size();
  std::vector<double> xs(n), ys(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x.data[i];
    ys[i] = y.data[i];
    xx[i] = xs[i] * xs[i];
    yy[i] = ys[i] * ys[i];
    xy[i] = xs[i] * ys[i];
  }
  const auto g = gaussian_window(o.window, o.sigma);
  const auto mx = filter_valid(xs, w, h, g);
  const auto my = filter_valid(ys, w, h, g);
  const auto fxx = filter_valid(xx, w, h, g);
  const auto fyy = filter_valid(yy, w, h, g);
  const auto fxy = filter_valid(xy, w, h, g);

  const double c1 = (o.k1 * kMaxIntensity) * (o.k1 * kMaxIntensity);
  const double c2 = (o.k2 * kMaxIntensity) * (o.k2 * kMaxIntensity);
  double sum_ssim = 0.0, sum_l = 0.0, sum_cs = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    // Written so that swapping x and y permutes only commutative operands.
    const double mxy = mx[i] * my[i];
    const double mxx = mx[i] * mx[i];
    const double myy = my[i] * my[i];
    const double sxx = fxx[i] - mxx;
    const double syy = fyy[i] - myy;
    const double sxy = fxy[i] - mxy;
    const double l_num = 2.0 * mxy + c1, l_den = mxx + myy + c1;
    const double cs_num = 2.0 * sxy + c2, cs_den = sxx + syy + c2;
    sum_ssim += (l_num * cs_num) / (l_den * cs_den);
    sum_l += l_num / l_den;
    sum_cs += cs_num / cs_den;
  }
  const double count = static_cast<double>(mx.size());
  return {sum_ssim / count, sum_l / count, sum_cs / count};
}

double ssim(const ImagePlane& x, const ImagePlane& y, const SsimOptions& options) {
  return ssim_components(x, y, options).ssim;
}

ImagePlane shave(const ImagePlane& plane, int border) {
  if (border < 0 || 2 * border >= plane.width || 2 * border >= plane.height) {
    throw Error(ErrorKind::InvalidArgument, "shave border " + std::to_string(border) +
                                                " too large for " + std::to_string(plane.width) +
                                                "x" + std::to_string(plane.height));
  }
  return crop(plane, border, border, plane.width - 2 * border, plane.height - 2 * border);
}

}  // namespace tmsr
