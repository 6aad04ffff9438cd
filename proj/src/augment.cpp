#include "tmsr/augment.hpp"

#include <algorithm>
#include <cmath>

#include "tmsr/error.hpp"
#include "tmsr/resize.hpp"

namespace tmsr {

ImagePlane rotate90(const ImagePlane& plane, int quarter_turns) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  if (turns == 0) return plane;
  const int w = plane.width, h = plane.height;
  ImagePlane out = turns == 2 ? ImagePlane(w, h) : ImagePlane(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float v = plane.at(x, y);
      switch (turns) {
        case 1: out.at(y, w - 1 - x) = v; break;
        case 2: out.at(w - 1 - x, h - 1 - y) = v; break;
        default: out.at(h - 1 - y, x) = v; break;
      }
    }
  return out;
}

std::vector<ImagePlane> augment(const std::vector<ImagePlane>& images,
                                const AugmentOptions& options) {
  if (images.empty()) throw Error(ErrorKind::InvalidArgument, "augment: no input images");
  std::vector<ImagePlane> out;
  out.reserve(images.size() * options.scales.size() * options.quarter_turns.size());
  for (const auto& img : images) {
    for (double s : options.scales) {
      if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "augment: scale must be positive");
      ImagePlane scaled;
      if (s == 1.0) {
        scaled = img;
      } else {
        const int w = std::max(1, static_cast<int>(std::floor(img.width * s)));
        const int h = std::max(1, static_cast<int>(std::floor(img.height * s)));
        scaled = bicubic_resize(img, w, h, true);
      }
      for (int turns : options.quarter_turns) out.push_back(rotate90(scaled, turns));
    }
  }
  return out;
}

}  // namespace tmsr
