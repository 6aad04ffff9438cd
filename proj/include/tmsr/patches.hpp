#pragma once

#include <filesystem>
#include <vector>

#include "tmsr/image.hpp"

namespace tmsr {

// Aligned LR/HR training sample. The LR origin is the HR origin / scale.
struct PatchPair {
  ImagePlane hr;
  ImagePlane lr;
  int source_id = 0;
  int hr_row = 0;
  int hr_col = 0;
};

struct PatchOptions {
  int scale = 2;
  int f_sub = 32;
  int stride = 14;
};

// Low-resolution counterpart of an HR plane: antialiased bicubic downscale by
// 1/scale. The plane must already have dimensions divisible by scale.
ImagePlane synthesize_lr(const ImagePlane& hr, int scale);

// Origins (row, col) at multiples of `stride` with origin + f_sub <= extent.
// No partial or extra boundary patch is taken.
int patch_positions(int extent, int f_sub, int stride);

// Crops `hr` to multiples of scale, synthesizes the LR plane once, then cuts
// f_sub x f_sub HR patches and (f_sub/scale)^2 LR patches row-major.
// Images smaller than f_sub yield no patches.
std::vector<PatchPair> extract_patches(const ImagePlane& hr, const PatchOptions& options = {},
                                       int source_id = 0);

// Flat patch container, samples in [0, 255].
//
//   TMSRPATCH1
//   count <n>
//   scale <s>
//   lr <h> <w>
//   hr <h> <w>
//   data
//   <n x (lr floats then hr floats), little-endian binary32>
struct PatchDataset {
  int scale = 2;
  int lr_size = 16;
  int hr_size = 32;
  std::vector<float> lr;  // count * lr_size^2
  std::vector<float> hr;  // count * hr_size^2

  std::size_t count() const {
    return lr_size > 0 ? lr.size() / (static_cast<std::size_t>(lr_size) * lr_size) : 0;
  }
  void append(const PatchPair& p);
  friend bool operator==(const PatchDataset&, const PatchDataset&) = default;
};

void save_patch_dataset(const PatchDataset& ds, const std::filesystem::path& path);
PatchDataset load_patch_dataset(const std::filesystem::path& path);

}  // namespace tmsr
