#pragma once

#include <filesystem>

#include "docstormer/tensor.hpp"

// 8-bit PNG input/output for C x H x W float tensors in [0, 1].

namespace docstormer {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads any PNG as 3 x H x W RGB (gray is replicated, alpha dropped).
Tensor<float> read_png_rgb(const std::filesystem::path& path);
/// Reads any PNG as 1 x H x W gray (RGB inputs are converted by libpng).
Tensor<float> read_png_gray(const std::filesystem::path& path);

/// Writes a 1- or 3-channel tensor, clamping to [0, 1] and rounding to 8 bits.
/// The file is written to a temporary sibling and renamed into place.
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

/// Rounds to the 8-bit grid that write_png stores.
Tensor<float> quantize_8bit(const Tensor<float>& image);

}  // namespace docstormer
