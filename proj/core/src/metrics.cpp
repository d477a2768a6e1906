#include "docstormer/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace docstormer {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same(const Tensor<float>& a, const Tensor<float>& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(who) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// Valid-mode separable filtering of an h x w buffer.
std::vector<double> filter_valid(const std::vector<double>& x, std::int64_t h, std::int64_t w,
                                 const std::vector<double>& taps) {
  const std::int64_t k = static_cast<std::int64_t>(taps.size());
  const std::int64_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t xo = 0; xo < ow; ++xo) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) acc += taps[t] * x[y * w + xo + t];
      rows[y * ow + xo] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t yo = 0; yo < oh; ++yo)
    for (std::int64_t t = 0; t < k; ++t) {
      const double wt = taps[t];
      const double* src = rows.data() + (yo + t) * ow;
      double* dst = out.data() + yo * ow;
      for (std::int64_t xo = 0; xo < ow; ++xo) dst[xo] += wt * src[xo];
    }
  return out;
}

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  require_same(a, b, "psnr");
  auto da = a.data(), db = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(da.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> luma(const Tensor<float>& image) {
  if (image.ndim() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("luma: expected 1 x H x W or 3 x H x W, got " + to_string(image.shape()));
  }
  const std::int64_t hw = image.dim(1) * image.dim(2);
  auto d = image.data();
  std::vector<double> y(static_cast<std::size_t>(hw));
  if (image.dim(0) == 1) {
    for (std::int64_t i = 0; i < hw; ++i) y[i] = d[i];
  } else {
    for (std::int64_t i = 0; i < hw; ++i) y[i] = 0.299 * d[i] + 0.587 * d[hw + i] + 0.114 * d[2 * hw + i];
  }
  return y;
}

std::vector<double> ssim_window_1d() {
  std::vector<double> taps(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
  require_same(a, b, "ssim");
  const std::int64_t h = a.dim(1), w = a.dim(2);
  if (h < kWindow || w < kWindow) {
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the 11x11 window");
  }
  const auto x = luma(a), y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto taps = ssim_window_1d();
  const auto mx = filter_valid(x, h, w, taps), my = filter_valid(y, h, w, taps);
  const auto sxx = filter_valid(xx, h, w, taps), syy = filter_valid(yy, h, w, taps), sxy = filter_valid(xy, h, w, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + kC1) * (2 * cxy + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mx.size());
}

MetricRecord evaluate(const Tensor<float>& pred, const Tensor<float>& gt) {
  return {psnr(pred, gt), ssim(pred, gt)};
}

}  // namespace docstormer
