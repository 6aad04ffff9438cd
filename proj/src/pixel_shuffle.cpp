#include "tmsr/pixel_shuffle.hpp"

#include <string>

#include "tmsr/error.hpp"

namespace tmsr {

Tensor pixel_shuffle(const Tensor& input, int scale) {
  if (scale < 1) throw Error(ErrorKind::InvalidArgument, "pixel_shuffle scale must be >= 1");
  const int rr = scale * scale;
  if (input.c() % rr != 0) {
    throw Error(ErrorKind::ShapeMismatch, "pixel_shuffle: channels " + std::to_string(input.c()) +
                                              " not divisible by " + std::to_string(rr));
  }
  const int oc = input.c() / rr;
  Tensor out({input.n(), oc, input.h() * scale, input.w() * scale});
  for (int b = 0; b < input.n(); ++b)
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < scale; ++i)
        for (int j = 0; j < scale; ++j) {
          const int ic = c * rr + i * scale + j;
          for (int y = 0; y < input.h(); ++y)
            for (int x = 0; x < input.w(); ++x)
              out.at(b, c, y * scale + i, x * scale + j) = input.at(b, ic, y, x);
        }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, int scale) {
  if (scale < 1) throw Error(ErrorKind::InvalidArgument, "pixel_unshuffle scale must be >= 1");
  if (input.h() % scale != 0 || input.w() % scale != 0) {
    throw Error(ErrorKind::ShapeMismatch, "pixel_unshuffle: spatial dims " + input.shape().str() +
                                              " not divisible by scale");
  }
  const int rr = scale * scale;
  const int h = input.h() / scale, w = input.w() / scale;
  Tensor out({input.n(), input.c() * rr, h, w});
  for (int b = 0; b < input.n(); ++b)
    for (int c = 0; c < input.c(); ++c)
      for (int i = 0; i < scale; ++i)
        for (int j = 0; j < scale; ++j) {
          const int oc = c * rr + i * scale + j;
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              out.at(b, oc, y, x) = input.at(b, c, y * scale + i, x * scale + j);
        }
  return out;
}

}  // namespace tmsr
