#include "tmsr/inference.hpp"

#include <algorithm>
#include <memory>

#include "tmsr/error.hpp"
#include "tmsr/resize.hpp"

namespace tmsr {

Tensor plane_to_tensor(const ImagePlane& plane) {
  Tensor t({1, 1, plane.height, plane.width});
  auto d = t.data();
  for (std::size_t i = 0; i < plane.data.size(); ++i) d[i] = plane.data[i] / 255.0f;
  return t;
}

ImagePlane tensor_to_plane(const Tensor& t, int sample) {
  if (t.c() != 1) throw Error(ErrorKind::ShapeMismatch, "tensor_to_plane expects 1 channel");
  ImagePlane out(t.w(), t.h());
  auto src = t.plane(sample, 0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    out.data[i] = std::clamp(src[i] * 255.0f, 0.0f, 255.0f);
  }
  return out;
}

ImagePlane upscale_plane(const TmsrModel& model, const ImagePlane& lr) {
  return tensor_to_plane(model.forward(plane_to_tensor(lr)).output);
}

Reconstructor model_reconstructor(const TmsrModel& model) {
  auto shared = std::make_shared<const TmsrModel>(model);
  return [shared](const ImagePlane& lr, const ImagePlane&) { return upscale_plane(*shared, lr); };
}

ImageRGB upscale_rgb(const TmsrModel& model, const ImageRGB& lr) {
  const int s = model.config().scale;
  const YCbCrPlanes in = rgb_to_ycbcr(lr);
  YCbCrPlanes out{upscale_plane(model, in.y),
                  bicubic_resize(in.cb, lr.width * s, lr.height * s, true),
                  bicubic_resize(in.cr, lr.width * s, lr.height * s, true)};
  return ycbcr_to_rgb(out);
}

}  // namespace tmsr
