#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmsr/image.hpp"

namespace tmsr {

inline constexpr double kMaxIntensity = 255.0;

double mse(const ImagePlane& x, const ImagePlane& y);

// 10 log10(255^2 / MSE); +infinity for identical planes.
double psnr(const ImagePlane& x, const ImagePlane& y);
double psnr_from_mse(double mse);
double mse_from_psnr(double psnr_db);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean over valid window positions of the luminance term
// (2 mu_x mu_y + C1) / (mu_x^2 + mu_y^2 + C1), the contrast-structure term
// (2 sigma_xy + C2) / (sigma_x^2 + sigma_y^2 + C2), and their product (SSIM).
struct SsimResult {
  double ssim = 0.0;
  double luminance = 0.0;
  double contrast_structure = 0.0;
};

// Gaussian-weighted windowed SSIM with C1 = (k1 L)^2, C2 = (k2 L)^2, L = 255.
SsimResult ssim_components(const ImagePlane& x, const ImagePlane& y, const SsimOptions& options = {});
double ssim(const ImagePlane& x, const ImagePlane& y, const SsimOptions& options = {});

// Removes `border` samples from every edge.
ImagePlane shave(const ImagePlane& plane, int border);

struct MetricRow {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
  bool skipped = false;  // unreadable input; excluded from the averages
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int shave = 0;
  std::string domain = "Y";

  // Recomputes the means over non-skipped rows, in row order.
  void finalize();

  // "image,psnr_db,ssim", one row per image, then "average,<psnr>,<ssim>".
  // Values use 4 decimals; infinite PSNR prints as "inf".
  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
};

// Produces the reconstructed HR plane (same dims as `hr`) from `lr`. `hr` is
// supplied for oracle reconstructors such as the identity; real
// reconstructors must only look at `lr`.
using Reconstructor = std::function<ImagePlane(const ImagePlane& lr, const ImagePlane& hr)>;

Reconstructor bicubic_reconstructor(int scale);
Reconstructor identity_reconstructor();

// Metric for one HR image: crop to multiples of scale, take the 8-bit Y
// plane, synthesize LR, reconstruct, clip and round to 8 bits, shave
// `shave` pixels, then PSNR and SSIM.
MetricRow evaluate_image(const Reconstructor& reconstruct, const ImageRGB& hr, int scale, int shave,
                         const std::string& name);

// Runs evaluate_image over every PNG in `hr_folder` (sorted by filename).
// Unreadable images become skipped rows with a warning on stderr.
MetricReport evaluate_folder(const Reconstructor& reconstruct,
                             const std::filesystem::path& hr_folder, int scale, int shave);

}  // namespace tmsr
