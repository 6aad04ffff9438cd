#pragma once

#include "tmsr/image.hpp"

namespace tmsr {

// Keys cubic (a = -0.5). Pixel centers are aligned MATLAB-style,
// u = (i + 0.5) / scale - 0.5 in 0-based coordinates. With `antialias` and
// scale < 1 the kernel is stretched by 1/scale so it acts as a low-pass
// filter. Taps outside the image are clamped to the border, weights are
// normalized to sum to 1, and the result is clipped to [0, 255]. Rows are
// resampled first when the vertical scale is not larger than the horizontal
// one, otherwise columns first.
ImagePlane bicubic_resize(const ImagePlane& plane, int out_w, int out_h, bool antialias = true);

// Keys kernel value at distance x.
double cubic_kernel(double x);

}  // namespace tmsr
