#include "tmsr/patches.hpp"

#include <fstream>
#include <sstream>

#include "tmsr/error.hpp"
#include "tmsr/resize.hpp"
#include "tmsr/weights_file.hpp"

namespace tmsr {

ImagePlane synthesize_lr(const ImagePlane& hr, int scale) {
  if (scale < 1 || hr.width % scale != 0 || hr.height % scale != 0) {
    throw Error(ErrorKind::InvalidArgument, "synthesize_lr: plane not divisible by scale");
  }
  return bicubic_resize(hr, hr.width / scale, hr.height / scale, true);
}

int patch_positions(int extent, int f_sub, int stride) {
  if (extent < f_sub) return 0;
  return (extent - f_sub) / stride + 1;
}

std::vector<PatchPair> extract_patches(const ImagePlane& hr_in, const PatchOptions& o,
                                       int source_id) {
  if (o.scale < 1 || o.f_sub < 1 || o.stride < 1) {
    throw Error(ErrorKind::InvalidArgument, "extract_patches: scale, f_sub, stride must be >= 1");
  }
  if (o.stride % o.scale != 0 || o.f_sub % o.scale != 0) {
    throw Error(ErrorKind::InvalidArgument,
                "extract_patches: stride and f_sub must be divisible by scale");
  }
  std::vector<PatchPair> out;
  const ImagePlane hr = crop_to_multiple(hr_in, o.scale);
  const int rows = patch_positions(hr.height, o.f_sub, o.stride);
  const int cols = patch_positions(hr.width, o.f_sub, o.stride);
  if (rows == 0 || cols == 0) return out;

  const ImagePlane lr = synthesize_lr(hr, o.scale);
  const int lr_size = o.f_sub / o.scale;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int r = i * o.stride, c = j * o.stride;
      out.push_back({crop(hr, c, r, o.f_sub, o.f_sub),
                     crop(lr, c / o.scale, r / o.scale, lr_size, lr_size), source_id, r, c});
    }
  return out;
}

void PatchDataset::append(const PatchPair& p) {
  if (p.lr.width != lr_size || p.lr.height != lr_size || p.hr.width != hr_size ||
      p.hr.height != hr_size) {
    throw Error(ErrorKind::ShapeMismatch, "patch dimensions differ from dataset dimensions");
  }
  lr.insert(lr.end(), p.lr.data.begin(), p.lr.data.end());
  hr.insert(hr.end(), p.hr.data.begin(), p.hr.data.end());
}

void save_patch_dataset(const PatchDataset& ds, const std::filesystem::path& path) {
  const std::size_t n = ds.count();
  const std::size_t lr_n = static_cast<std::size_t>(ds.lr_size) * ds.lr_size;
  const std::size_t hr_n = static_cast<std::size_t>(ds.hr_size) * ds.hr_size;
  if (ds.hr.size() != n * hr_n) throw Error(ErrorKind::ShapeMismatch, "patch dataset LR/HR count mismatch");
  atomic_write(path, [&](std::ostream& os) {
    os << "TMSRPATCH1\n"
       << "count " << n << "\n"
       << "scale " << ds.scale << "\n"
       << "lr " << ds.lr_size << " " << ds.lr_size << "\n"
       << "hr " << ds.hr_size << " " << ds.hr_size << "\n"
       << "data\n";
    for (std::size_t i = 0; i < n; ++i) {
      write_f32_le(os, std::span<const float>(ds.lr).subspan(i * lr_n, lr_n));
      write_f32_le(os, std::span<const float>(ds.hr).subspan(i * hr_n, hr_n));
    }
  });
}

PatchDataset load_patch_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open patch file " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "TMSRPATCH1") {
    throw Error(ErrorKind::BadMagic, path.string() + ": not a TMSRPATCH1 file");
  }
  PatchDataset ds;
  std::size_t count = 0;
  int lr_h = 0, lr_w = 0, hr_h = 0, hr_w = 0;
  bool data = false;
  while (!data && std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "count") ls >> count;
    else if (key == "scale") ls >> ds.scale;
    else if (key == "lr") ls >> lr_h >> lr_w;
    else if (key == "hr") ls >> hr_h >> hr_w;
    else if (key == "data") data = true;
    else throw Error(ErrorKind::ConfigMismatch, "patch header: unexpected line '" + line + "'");
    if (!ls && !data) throw Error(ErrorKind::ConfigMismatch, "patch header: malformed '" + line + "'");
  }
  if (!data) throw Error(ErrorKind::PayloadLength, "patch file has no data section");
  if (lr_h != lr_w || hr_h != hr_w || lr_h < 1 || hr_h != lr_h * ds.scale) {
    throw Error(ErrorKind::ConfigMismatch, "patch header: inconsistent LR/HR dimensions");
  }
  ds.lr_size = lr_h;
  ds.hr_size = hr_h;
  const std::size_t lr_n = static_cast<std::size_t>(lr_h) * lr_w;
  const std::size_t hr_n = static_cast<std::size_t>(hr_h) * hr_w;
  ds.lr.resize(count * lr_n);
  ds.hr.resize(count * hr_n);
  for (std::size_t i = 0; i < count; ++i) {
    read_f32_le(is, std::span<float>(ds.lr).subspan(i * lr_n, lr_n));
    read_f32_le(is, std::span<float>(ds.hr).subspan(i * hr_n, hr_n));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::PayloadLength, "patch file has trailing bytes");
  }
  return ds;
}

}  // namespace tmsr
