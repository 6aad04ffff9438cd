#include "tmsr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tmsr/error.hpp"

namespace tmsr {

ImageRGB::ImageRGB(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw Error(ErrorKind::InvalidArgument, "image dimensions must be >= 1");
  data.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

ImagePlane::ImagePlane(int w, int h, float fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error(ErrorKind::InvalidArgument, "negative plane dimensions");
  data.assign(static_cast<std::size_t>(w) * h, fill);
}

void ImagePlane::clip() {
  for (float& v : data) v = std::clamp(v, 0.0f, 255.0f);
}

namespace {

inline float clip255(double v) { return static_cast<float>(std::clamp(v, 0.0, 255.0)); }

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

ImagePlane rgb_to_y(const ImageRGB& img) {
  ImagePlane y(img.width, img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const auto* p = img.pixel(c, r);
      y.at(c, r) = clip255(16.0 + (65.481 * p[0] + 128.553 * p[1] + 24.966 * p[2]) / 255.0);
    }
  return y;
}

YCbCrPlanes rgb_to_ycbcr(const ImageRGB& img) {
  YCbCrPlanes out{rgb_to_y(img), ImagePlane(img.width, img.height),
                  ImagePlane(img.width, img.height)};
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const auto* p = img.pixel(c, r);
      out.cb.at(c, r) = clip255(128.0 + (-37.797 * p[0] - 74.203 * p[1] + 112.0 * p[2]) / 255.0);
      out.cr.at(c, r) = clip255(128.0 + (112.0 * p[0] - 93.786 * p[1] - 18.214 * p[2]) / 255.0);
    }
  return out;
}

ImageRGB ycbcr_to_rgb(const YCbCrPlanes& planes) {
  const int w = planes.y.width, h = planes.y.height;
  if (planes.cb.width != w || planes.cb.height != h || planes.cr.width != w || planes.cr.height != h) {
    throw Error(ErrorKind::ShapeMismatch, "ycbcr planes have different dimensions");
  }
  ImageRGB img(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double y = planes.y.at(c, r) - 16.0;
      const double cb = planes.cb.at(c, r) - 128.0;
      const double cr = planes.cr.at(c, r) - 128.0;
      auto* p = img.pixel(c, r);
      p[0] = to_u8(255.0 / 219.0 * y + 255.0 / 224.0 * 1.402 * cr);
      p[1] = to_u8(255.0 / 219.0 * y - 255.0 / 224.0 * 1.772 * 0.114 / 0.587 * cb -
                   255.0 / 224.0 * 1.402 * 0.299 / 0.587 * cr);
      p[2] = to_u8(255.0 / 219.0 * y + 255.0 / 224.0 * 1.772 * cb);
    }
  return img;
}

ImagePlane quantize(const ImagePlane& plane) {
  ImagePlane out = plane;
  for (float& v : out.data) v = static_cast<float>(std::nearbyint(std::clamp(v, 0.0f, 255.0f)));
  return out;
}

ImageRGB plane_to_rgb(const ImagePlane& plane) {
  ImageRGB img(plane.width, plane.height);
  for (int r = 0; r < plane.height; ++r)
    for (int c = 0; c < plane.width; ++c) {
      const auto v = to_u8(plane.at(c, r));
      auto* p = img.pixel(c, r);
      p[0] = p[1] = p[2] = v;
    }
  return img;
}

ImagePlane crop(const ImagePlane& plane, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > plane.width || y0 + h > plane.height) {
    throw Error(ErrorKind::InvalidArgument, "crop window outside plane");
  }
  ImagePlane out(w, h);
  for (int r = 0; r < h; ++r)
    std::copy_n(&plane.data[static_cast<std::size_t>(y0 + r) * plane.width + x0], w,
                &out.data[static_cast<std::size_t>(r) * w]);
  return out;
}

ImagePlane crop_to_multiple(const ImagePlane& plane, int multiple) {
  return crop(plane, 0, 0, plane.width - plane.width % multiple,
              plane.height - plane.height % multiple);
}

ImageRGB crop_to_multiple(const ImageRGB& img, int multiple) {
  const int w = img.width - img.width % multiple, h = img.height - img.height % multiple;
  ImageRGB out(w, h);
  for (int r = 0; r < h; ++r)
    std::copy_n(img.pixel(0, r), static_cast<std::size_t>(w) * 3, out.pixel(0, r));
  return out;
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace tmsr
