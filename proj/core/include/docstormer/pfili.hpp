#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "docstormer/tensor.hpp"

// Large-image inference strategies around an image-to-image model: run at full
// resolution, resize around the model (bicubic), tile (crop-patches), or apply
// a low-resolution residual as a multiplicative correction (PFILI).

namespace docstormer {

using ImageModel = std::function<Tensor<float>(const Tensor<float>&)>;

enum class Strategy { Full, Bicubic, Patches, Pfili };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct InferenceOptions {
  std::int64_t work_h = 768;
  std::int64_t work_w = 1024;
  std::int64_t patch = 256;
  double eps = 1e-4;
  void validate() const;
};

/// Model at the input resolution, output clamped to [0, 1].
Tensor<float> full_infer(const ImageModel& model, const Tensor<float>& image);

/// Bicubic down to the work extents, model, bicubic back up, clamp.
Tensor<float> bicubic_infer(const ImageModel& model, const Tensor<float>& image, std::int64_t work_h,
                            std::int64_t work_w);

/// Non-overlapping patch x patch tiles (edge tiles may be smaller), stitched.
Tensor<float> crop_patches_infer(const ImageModel& model, const Tensor<float>& image, std::int64_t patch = 256);

/// down = clamp01(bicubic(image)); residual = model(down) - down;
/// factor = residual / max(down, eps); out = image * (bicubic_up(factor) + 1).
/// Work extents larger than the image fall back to the image extents.
Tensor<float> pfili_infer(const ImageModel& model, const Tensor<float>& image, const InferenceOptions& options = {});

Tensor<float> run_strategy(Strategy s, const ImageModel& model, const Tensor<float>& image,
                           const InferenceOptions& options = {});

struct BenchRecord {
  std::string strategy;
  std::string image;
  double time_s = 0.0;          // mean over runs
  double time_median_s = 0.0;
  std::vector<double> run_times_s;
  std::size_t peak_bytes = 0;  // peak tensor bytes above the pre-run baseline
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct BenchImage {
  std::string name;
  Tensor<float> input;
  Tensor<float> ground_truth;  // may be undefined: metrics are then taken against the input
};

/// Times every strategy on every image `runs` times, serially.
std::vector<BenchRecord> bench(const ImageModel& model, const std::vector<BenchImage>& images,
                               const std::vector<Strategy>& strategies, int runs, const InferenceOptions& options = {});

/// One record per line: strategy=... image=... time_s=... peak_bytes=... psnr_db=... ssim=...
void write_bench_report(const std::filesystem::path& path, const std::vector<BenchRecord>& records);

}  // namespace docstormer
