#pragma once

#include "tmsr/tensor.hpp"

namespace tmsr {

// Sub-pixel rearrangement: (n, c*r*r, h, w) -> (n, c, h*r, w*r) with
// out[b][c][y*r + i][x*r + j] = in[b][c*r*r + i*r + j][y][x].
Tensor pixel_shuffle(const Tensor& input, int scale);

// Exact inverse of pixel_shuffle; also the backward pass of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int scale);

}  // namespace tmsr
