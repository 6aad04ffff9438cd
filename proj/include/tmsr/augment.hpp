#pragma once

#include <vector>

#include "tmsr/image.hpp"

namespace tmsr {

struct AugmentOptions {
  std::vector<double> scales{1.0, 0.9, 0.8, 0.7, 0.6};
  std::vector<int> quarter_turns{0, 1, 2, 3};  // counter-clockwise multiples of 90 degrees
};

// Exact sample permutation; four quarter turns is the identity.
ImagePlane rotate90(const ImagePlane& plane, int quarter_turns);

// For every input image, every scale (antialiased bicubic, target dims
// floored), then every rotation of the scaled image, in that order. Output
// size is images * scales * rotations.
std::vector<ImagePlane> augment(const std::vector<ImagePlane>& images,
                                const AugmentOptions& options = {});

}  // namespace tmsr
