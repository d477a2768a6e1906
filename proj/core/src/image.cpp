#include "docstormer/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace docstormer {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

struct Decoded {
  std::int64_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, 3 per pixel
};

Decoded decode(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&image, f.get())) {
    throw IoError("not a readable PNG: " + path.string() + " (" + image.message + ")");
  }
  image.format = PNG_FORMAT_RGB;
  Decoded out;
  out.width = image.width;
  out.height = image.height;
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("failed to decode " + path.string() + " (" + image.message + ")");
  }
  return out;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Tensor<float> read_png_rgb(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  Tensor<float> t(Shape{3, d.height, d.width});
  auto out = t.mutable_data();
  const std::int64_t hw = d.height * d.width;
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) out[c * hw + i] = static_cast<float>(d.rgb[i * 3 + c]) / 255.0f;
  return t;
}

Tensor<float> read_png_gray(const std::filesystem::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&image, f.get())) {
    throw IoError("not a readable PNG: " + path.string() + " (" + image.message + ")");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> gray(PNG_IMAGE_SIZE(image));
  const std::int64_t h = image.height, w = image.width;
  if (!png_image_finish_read(&image, nullptr, gray.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("failed to decode " + path.string() + " (" + image.message + ")");
  }
  Tensor<float> t(Shape{1, h, w});
  auto out = t.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(gray[i]) / 255.0f;
  return t;
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.ndim() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("write_png: expected 1 x H x W or 3 x H x W, got " + to_string(image.shape()));
  }
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2), hw = h * w;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(c * hw));
  auto src = image.data();
  for (std::int64_t i = 0; i < hw; ++i)
    for (std::int64_t k = 0; k < c; ++k) bytes[i * c + k] = to_byte(src[k * hw + i]);

  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(w);
  out.height = static_cast<png_uint_32>(h);
  out.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    File f(std::fopen(tmp.c_str(), "wb"));
    if (!f) throw IoError("cannot write " + tmp.string());
    if (!png_image_write_to_stdio(&out, f.get(), 0, bytes.data(), 0, nullptr)) {
      throw IoError("failed to encode " + path.string() + " (" + out.message + ")");
    }
    if (std::fflush(f.get()) != 0) throw IoError("failed to flush " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

Tensor<float> quantize_8bit(const Tensor<float>& image) {
  Tensor<float> out(image.shape());
  auto src = image.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(to_byte(src[i])) / 255.0f;
  return out;
}

}  // namespace docstormer
