#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tmsr {

// 8-bit interleaved RGB.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // width * height * 3

  ImageRGB() = default;
  ImageRGB(int w, int h);

  std::uint8_t* pixel(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

// Single-channel float image with samples in [0, 255].
struct ImagePlane {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major

  ImagePlane() = default;
  ImagePlane(int w, int h, float fill = 0.0f);

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  void clip();  // clamp every sample to [0, 255]
  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;
};

// BT.601 "studio swing" conversion, R, G, B in [0, 255]:
//   Y  = 16  + ( 65.481 R + 128.553 G +  24.966 B) / 255
//   Cb = 128 + (-37.797 R -  74.203 G + 112.000 B) / 255
//   Cr = 128 + (112.000 R -  93.786 G -  18.214 B) / 255
ImagePlane rgb_to_y(const ImageRGB& img);

struct YCbCrPlanes {
  ImagePlane y, cb, cr;
};
YCbCrPlanes rgb_to_ycbcr(const ImageRGB& img);
ImageRGB ycbcr_to_rgb(const YCbCrPlanes& planes);

// Round to the nearest 8-bit level (matches 8-bit luma pipelines).
ImagePlane quantize(const ImagePlane& plane);

// Gray RGB image (R = G = B = round(sample)).
ImageRGB plane_to_rgb(const ImagePlane& plane);

// Top-left anchored crop to dimensions divisible by `multiple`.
ImagePlane crop_to_multiple(const ImagePlane& plane, int multiple);
ImagePlane crop(const ImagePlane& plane, int x0, int y0, int w, int h);
ImageRGB crop_to_multiple(const ImageRGB& img, int multiple);

// PNG I/O. 8-bit gray, gray+alpha, RGB, RGBA and palette images are read
// (alpha dropped, gray expanded to R = G = B); 16-bit images are rejected
// with UnsupportedBitDepth.
ImageRGB load_png(const std::filesystem::path& path);
void save_png(const ImageRGB& img, const std::filesystem::path& path);

// Sorted list of *.png files in a directory (non-recursive).
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

}  // namespace tmsr
