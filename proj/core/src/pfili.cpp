#include "docstormer/pfili.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "docstormer/metrics.hpp"
#include "docstormer/ops.hpp"
#include "docstormer/tape.hpp"

namespace docstormer {

namespace {

void require_image(const Tensor<float>& image, const char* who) {
  if (!image.defined() || image.ndim() != 3 || image.numel() == 0) {
    throw ShapeError(std::string(who) + ": expected a non-empty C x H x W image");
  }
}

Tensor<float> clamp01(const Tensor<float>& x) {
  Tensor<float> out = x.clone();
  for (auto& v : out.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Tensor<float> resize_if_needed(const Tensor<float>& x, std::int64_t h, std::int64_t w) {
  if (x.dim(1) == h && x.dim(2) == w) return x;
  return resize_bicubic(x, h, w);
}

void check_model_output(const Tensor<float>& in, const Tensor<float>& out) {
  if (!out.defined() || out.shape() != in.shape()) {
    throw ShapeError("model output shape " + (out.defined() ? to_string(out.shape()) : std::string("undefined")) +
                     " differs from its input " + to_string(in.shape()));
  }
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Full:
      return "full";
    case Strategy::Bicubic:
      return "bicubic";
    case Strategy::Patches:
      return "patches";
    case Strategy::Pfili:
      return "pfili";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::Full, Strategy::Bicubic, Strategy::Patches, Strategy::Pfili}) {
    if (strategy_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "' (expected full, bicubic, patches or pfili)");
}

void InferenceOptions::validate() const {
  if (work_h <= 0 || work_w <= 0 || work_h % 8 != 0 || work_w % 8 != 0) {
    throw std::invalid_argument("work extents must be positive multiples of 8");
  }
  if (patch <= 0 || patch % 8 != 0) throw std::invalid_argument("patch size must be a positive multiple of 8");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
}

Tensor<float> full_infer(const ImageModel& model, const Tensor<float>& image) {
  require_image(image, "full_infer");
  TapeScope no_tape(nullptr);
  Tensor<float> out = model(image);
  check_model_output(image, out);
  return clamp01(out);
}

Tensor<float> bicubic_infer(const ImageModel& model, const Tensor<float>& image, std::int64_t work_h,
                            std::int64_t work_w) {
  require_image(image, "bicubic_infer");
  TapeScope no_tape(nullptr);
  const std::int64_t h = image.dim(1), w = image.dim(2);
  Tensor<float> down = resize_if_needed(image, std::min(work_h, h), std::min(work_w, w));
  Tensor<float> pred = model(down);
  check_model_output(down, pred);
  down = Tensor<float>();
  return clamp01(resize_if_needed(pred, h, w));
}

Tensor<float> crop_patches_infer(const ImageModel& model, const Tensor<float>& image, std::int64_t patch) {
  require_image(image, "crop_patches_infer");
  if (patch <= 0 || patch % 8 != 0) throw std::invalid_argument("patch size must be a positive multiple of 8");
  TapeScope no_tape(nullptr);
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor<float> out(image.shape());
  auto dst = out.mutable_data();
  for (std::int64_t top = 0; top < h; top += patch) {
    for (std::int64_t left = 0; left < w; left += patch) {
      const std::int64_t th = std::min(patch, h - top), tw = std::min(patch, w - left);
      Tensor<float> tile = crop(image, top, left, th, tw);
      Tensor<float> pred = model(tile);
      check_model_output(tile, pred);
      auto src = pred.data();
      for (std::int64_t k = 0; k < c; ++k)
        for (std::int64_t y = 0; y < th; ++y)
          for (std::int64_t x = 0; x < tw; ++x)
            dst[(k * h + top + y) * w + left + x] = std::clamp(src[(k * th + y) * tw + x], 0.0f, 1.0f);
    }
  }
  return out;
}

Tensor<float> pfili_infer(const ImageModel& model, const Tensor<float>& image, const InferenceOptions& options) {
  require_image(image, "pfili_infer");
  if (!(options.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  TapeScope no_tape(nullptr);
  const std::int64_t h = image.dim(1), w = image.dim(2);
  const float eps = static_cast<float>(options.eps);
  // The model only ever sees valid images, so bicubic overshoot is clamped
  // away before both the model call and the division.
  Tensor<float> down = clamp01(resize_if_needed(image, std::min(options.work_h, h), std::min(options.work_w, w)));
  Tensor<float> factor(down.shape());
  {
    Tensor<float> pred = model(down);
    check_model_output(down, pred);
    auto f = factor.mutable_data();
    auto p = pred.data();
    auto d = down.data();
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (p[i] - d[i]) / std::max(d[i], eps);
  }
  down = Tensor<float>();
  Tensor<float> up = resize_if_needed(factor, h, w);
  factor = Tensor<float>();
  auto u = up.mutable_data();
  auto src = image.data();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(src[i] * (u[i] + 1.0f), 0.0f, 1.0f);
  return up;
}

Tensor<float> run_strategy(Strategy s, const ImageModel& model, const Tensor<float>& image,
                           const InferenceOptions& options) {
  switch (s) {
    case Strategy::Full:
      return full_infer(model, image);
    case Strategy::Bicubic:
      return bicubic_infer(model, image, options.work_h, options.work_w);
    case Strategy::Patches:
      return crop_patches_infer(model, image, options.patch);
    case Strategy::Pfili:
      return pfili_infer(model, image, options);
  }
  throw std::invalid_argument("unknown strategy");
}

std::vector<BenchRecord> bench(const ImageModel& model, const std::vector<BenchImage>& images,
                               const std::vector<Strategy>& strategies, int runs, const InferenceOptions& options) {
  if (runs < 1) throw std::invalid_argument("bench: runs must be positive");
  std::vector<BenchRecord> records;
  for (const auto& img : images) {
    for (Strategy s : strategies) {
      BenchRecord r;
      r.strategy = std::string(strategy_name(s));
      r.image = img.name;
      Tensor<float> result;
      for (int k = 0; k < runs; ++k) {
        result = Tensor<float>();
        const std::size_t baseline = memory::current_bytes();
        memory::reset_peak();
        const auto t0 = std::chrono::steady_clock::now();
        result = run_strategy(s, model, img.input, options);
        const auto t1 = std::chrono::steady_clock::now();
        r.peak_bytes = std::max(r.peak_bytes, memory::peak_bytes() - baseline);
        r.run_times_s.push_back(std::chrono::duration<double>(t1 - t0).count());
      }
      double total = 0.0;
      for (double t : r.run_times_s) total += t;
      r.time_s = total / static_cast<double>(runs);
      auto sorted = r.run_times_s;
      std::sort(sorted.begin(), sorted.end());
      r.time_median_s = sorted[sorted.size() / 2];
      const Tensor<float>& ref = img.ground_truth.defined() ? img.ground_truth : img.input;
      r.psnr_db = psnr(result, ref);
      r.ssim = ssim(result, ref);
      records.push_back(std::move(r));
    }
  }
  return records;
}

void write_bench_report(const std::filesystem::path& path, const std::vector<BenchRecord>& records) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    char buf[256];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "strategy=%s image=%s time_s=%.6f peak_bytes=%zu psnr_db=%.4f ssim=%.6f\n",
                    r.strategy.c_str(), r.image.c_str(), r.time_s, r.peak_bytes, r.psnr_db, r.ssim);
      out << buf;
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace docstormer
