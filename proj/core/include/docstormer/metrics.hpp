#pragma once

#include <vector>

#include "docstormer/tensor.hpp"

namespace docstormer {

inline constexpr double kPsnrCap = 100.0;

struct MetricRecord {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// 10 log10(1 / MSE) for images in [0, 1], capped at kPsnrCap.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

/// ITU-R 601 luma of a 3 x H x W image (1-channel inputs pass through), as
/// a row-major H x W buffer in double precision.
std::vector<double> luma(const Tensor<float>& image);

/// Mean SSIM over valid 11x11 Gaussian (sigma 1.5) windows of the luma
/// images, K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

MetricRecord evaluate(const Tensor<float>& pred, const Tensor<float>& gt);

/// Normalized 1-D Gaussian taps used by ssim.
std::vector<double> ssim_window_1d();

}  // namespace docstormer
