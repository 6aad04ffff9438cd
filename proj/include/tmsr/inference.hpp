#pragma once

#include "tmsr/image.hpp"
#include "tmsr/metrics.hpp"
#include "tmsr/model.hpp"

namespace tmsr {

// [0, 255] plane <-> (1, 1, h, w) tensor in the network domain [0, 1].
Tensor plane_to_tensor(const ImagePlane& plane);
// Maps back to [0, 255] and clips.
ImagePlane tensor_to_plane(const Tensor& t, int sample = 0);

ImagePlane upscale_plane(const TmsrModel& model, const ImagePlane& lr);

// The model's scale must match the evaluation scale.
Reconstructor model_reconstructor(const TmsrModel& model);

// Y through the model, Cb and Cr bicubic-upscaled, recombined.
ImageRGB upscale_rgb(const TmsrModel& model, const ImageRGB& lr);

}  // namespace tmsr
