#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "tmsr/error.hpp"
#include "tmsr/metrics.hpp"
#include "tmsr/patches.hpp"
#include "tmsr/resize.hpp"

namespace tmsr {
namespace {

std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void MetricReport::finalize() {
  double sp = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.skipped) continue;
    sp += r.psnr_db;
    ss += r.ssim;
    ++n;
  }
  mean_psnr = n ? sp / static_cast<double>(n) : std::nan("");
  mean_ssim = n ? ss / static_cast<double>(n) : std::nan("");
}

void MetricReport::write_csv(std::ostream& os) const {
  os << "image,psnr_db,ssim\n";
  for (const auto& r : rows) {
    if (r.skipped) {
      os << r.image << ",skipped,skipped\n";
    } else {
      os << r.image << "," << format_value(r.psnr_db) << "," << format_value(r.ssim) << "\n";
    }
  }
  os << "average," << format_value(mean_psnr) << "," << format_value(mean_ssim) << "\n";
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write report " + path.string());
  write_csv(os);
}

Reconstructor bicubic_reconstructor(int scale) {
  return [scale](const ImagePlane& lr, const ImagePlane&) {
    return bicubic_resize(lr, lr.width * scale, lr.height * scale, true);
  };
}

Reconstructor identity_reconstructor() {
  return [](const ImagePlane&, const ImagePlane& hr) { return hr; };
}

MetricRow evaluate_image(const Reconstructor& reconstruct, const ImageRGB& hr_rgb, int scale,
                         int border, const std::string& name) {
  const ImagePlane hr = quantize(rgb_to_y(crop_to_multiple(hr_rgb, scale)));
  const ImagePlane lr = synthesize_lr(hr, scale);
  const ImagePlane sr = reconstruct(lr, hr);
  if (sr.width != hr.width || sr.height != hr.height) {
    throw Error(ErrorKind::ShapeMismatch, name + ": reconstruction has wrong dimensions");
  }
  const ImagePlane a = shave(quantize(sr), border);
  const ImagePlane b = shave(hr, border);
  return {name, psnr(a, b), ssim(a, b), false};
}

MetricReport evaluate_folder(const Reconstructor& reconstruct,
                             const std::filesystem::path& hr_folder, int scale, int border) {
  const auto files = list_png_files(hr_folder);
  if (files.empty()) {
    throw Error(ErrorKind::Io, "no PNG images in " + hr_folder.string());
  }
  MetricReport report;
  report.shave = border;
  for (const auto& file : files) {
    const std::string name = file.stem().string();
    ImageRGB img;
    try {
      img = load_png(file);
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << "\n";
      report.rows.push_back({name, 0.0, 0.0, true});
      continue;
    }
    report.rows.push_back(evaluate_image(reconstruct, img, scale, border, name));
  }
  report.finalize();
  return report;
}

}  // namespace tmsr
