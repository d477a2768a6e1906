#include "docstormer/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "docstormer/image.hpp"

namespace docstormer {

namespace {

constexpr std::array<DegradationKind, kDegradationTypes> kAllKinds = {DegradationKind::Shadow,
                                                                     DegradationKind::Wrinkle,
                                                                     DegradationKind::Bleed};

void require_rgb(const Tensor<float>& image, const char* who) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(who) + ": expected a 3 x H x W image, got " + to_string(image.shape()));
  }
}

double smoothstep(double lo, double hi, double x) {
  if (hi <= lo) return x < lo ? 0.0 : 1.0;
  const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// out = img * (1 - blend), blend broadcast over channels.
Tensor<float> darken(const Tensor<float>& image, const Tensor<float>& blend) {
  Tensor<float> out(image.shape());
  const std::int64_t hw = image.dim(1) * image.dim(2);
  auto src = image.data();
  auto b = blend.data();
  auto dst = out.mutable_data();
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < hw; ++i) dst[c * hw + i] = src[c * hw + i] * (1.0f - b[i]);
  return out;
}

std::vector<float> gaussian_taps(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> taps(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    taps[i + radius] = static_cast<float>(v);
    total += v;
  }
  for (auto& t : taps) t = static_cast<float>(t / total);
  return taps;
}

// Separable Gaussian blur of an h x w plane with replicated borders.
std::vector<float> blur(const std::vector<float>& plane, std::int64_t h, std::int64_t w, double sigma) {
  if (sigma <= 0.0) return plane;
  const auto taps = gaussian_taps(sigma);
  const std::int64_t r = static_cast<std::int64_t>(taps.size() / 2);
  std::vector<float> tmp(plane.size()), out(plane.size());
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (std::int64_t k = -r; k <= r; ++k) acc += taps[k + r] * plane[y * w + std::clamp(x + k, std::int64_t{0}, w - 1)];
      tmp[y * w + x] = acc;
    }
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (std::int64_t k = -r; k <= r; ++k) acc += taps[k + r] * tmp[std::clamp(y + k, std::int64_t{0}, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

Tensor<float> thresholded_edges(const Tensor<float>& map) {
  Tensor<float> e = sobel_magnitude(map);
  for (auto& v : e.mutable_data()) {
    if (v < kEdgeThreshold) v = 0.0f;
  }
  return e;
}

std::string join_kinds(const std::vector<DegradationKind>& kinds) {
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) out += '+';
    out += kind_name(kinds[i]);
  }
  return kinds.empty() ? "none" : out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::string_view kind_name(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::Shadow:
      return "shadow";
    case DegradationKind::Wrinkle:
      return "wrinkle";
    case DegradationKind::Bleed:
      return "bleed";
  }
  return "unknown";
}

DegradationKind parse_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown degradation kind '" + std::string(name) + "'");
}

void DegradationSpec::validate() const {
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw std::invalid_argument("degradation intensity must be in [0, 1]");
  if (kind == DegradationKind::Shadow && (shadow.ax <= 0.0 || shadow.ay <= 0.0 || shadow.feather < 0.0)) {
    throw std::invalid_argument("shadow axes must be positive and feather non-negative");
  }
  if (kind == DegradationKind::Wrinkle && (wrinkle.creases < 0 || wrinkle.width <= 0.0 || wrinkle.depth < 0.0 ||
                                           wrinkle.depth > 1.0)) {
    throw std::invalid_argument("wrinkle needs creases >= 0, width > 0, depth in [0, 1]");
  }
  if (kind == DegradationKind::Bleed && bleed.blur_sigma < 0.0) {
    throw std::invalid_argument("bleed blur sigma must be non-negative");
  }
}

DegradationSpec DegradationSpec::random(DegradationKind kind, Rng& rng, double min_intensity) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DegradationSpec s;
  s.kind = kind;
  s.intensity = min_intensity + (1.0 - min_intensity) * u(rng);
  s.seed = rng();
  s.shadow.cx = 0.15 + 0.7 * u(rng);
  s.shadow.cy = 0.15 + 0.7 * u(rng);
  s.shadow.ax = 0.25 + 0.4 * u(rng);
  s.shadow.ay = 0.2 + 0.4 * u(rng);
  s.shadow.angle = std::numbers::pi * u(rng);
  s.shadow.feather = 0.15 + 0.35 * u(rng);
  s.wrinkle.creases = 2 + static_cast<int>(5 * u(rng));
  s.wrinkle.angle_jitter = 0.3 + 0.6 * u(rng);
  s.wrinkle.depth = 0.45 + 0.3 * u(rng);
  s.wrinkle.width = 1.2 + 1.0 * u(rng);
  s.bleed.flip_horizontal = u(rng) < 0.8;
  s.bleed.blur_sigma = 0.8 + 1.2 * u(rng);
  s.bleed.ink_threshold = 0.45 + 0.15 * u(rng);
  s.bleed.offset_x = static_cast<std::int64_t>(7 * u(rng)) - 3;
  s.bleed.offset_y = static_cast<std::int64_t>(7 * u(rng)) - 3;
  return s;
}

Degraded apply_shadow(const Tensor<float>& image, const DegradationSpec& spec) {
  require_rgb(image, "apply_shadow");
  spec.validate();
  const std::int64_t h = image.dim(1), w = image.dim(2);
  const auto& g = spec.shadow;
  Tensor<float> blend(Shape{1, h, w});
  auto b = blend.mutable_data();
  if (spec.intensity > 0.0) {
    const double ca = std::cos(g.angle), sa = std::sin(g.angle);
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const double u = (x + 0.5) / static_cast<double>(w) - g.cx;
        const double v = (y + 0.5) / static_cast<double>(h) - g.cy;
        const double ru = (ca * u + sa * v) / g.ax, rv = (-sa * u + ca * v) / g.ay;
        const double r = std::sqrt(ru * ru + rv * rv);
        const double m = 1.0 - smoothstep(1.0 - g.feather, 1.0 + g.feather, r);
        b[y * w + x] = static_cast<float>(spec.intensity * m);
      }
  }
  return {darken(image, blend), blend};
}

Tensor<float> wrinkle_map(std::int64_t height, std::int64_t width, const DegradationSpec& spec) {
  const auto& g = spec.wrinkle;
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Crease {
    double px, py, nx, ny, tx, ty, depth, freq, phase;
  };
  const double base = std::numbers::pi * u(rng);
  std::vector<Crease> creases;
  for (int i = 0; i < g.creases; ++i) {
    const double theta = base + g.angle_jitter * (2.0 * u(rng) - 1.0);
    Crease c;
    c.px = u(rng) * static_cast<double>(width);
    c.py = u(rng) * static_cast<double>(height);
    c.tx = std::cos(theta);
    c.ty = std::sin(theta);
    c.nx = -c.ty;
    c.ny = c.tx;
    c.depth = g.depth * (0.75 + 0.25 * u(rng));
    c.freq = 0.05 + 0.15 * u(rng);
    c.phase = 2.0 * std::numbers::pi * u(rng);
    creases.push_back(c);
  }
  Tensor<float> map(Shape{1, height, width}, 1.0f);
  auto m = map.mutable_data();
  const double inv = 1.0 / (2.0 * g.width * g.width);
  for (std::int64_t y = 0; y < height; ++y)
    for (std::int64_t x = 0; x < width; ++x) {
      double dip = 0.0;
      for (const auto& c : creases) {
        const double dx = x - c.px, dy = y - c.py;
        const double d = dx * c.nx + dy * c.ny;
        const double t = dx * c.tx + dy * c.ty;
        // Ridged modulation along the fold.
        const double ridge = 0.7 + 0.3 * std::abs(std::sin(c.freq * t + c.phase));
        dip = std::max(dip, c.depth * ridge * std::exp(-d * d * inv));
      }
      m[y * width + x] = static_cast<float>(std::clamp(1.0 - dip, 0.0, 1.0));
    }
  return map;
}

Tensor<float> linear_burn(const Tensor<float>& image, const Tensor<float>& wrinkle, double intensity) {
  require_rgb(image, "linear_burn");
  const std::int64_t hw = image.dim(1) * image.dim(2);
  if (wrinkle.numel() != hw) throw ShapeError("linear_burn: wrinkle map extents differ from the image");
  Tensor<float> out(image.shape());
  auto src = image.data();
  auto wm = wrinkle.data();
  auto dst = out.mutable_data();
  const float k = static_cast<float>(intensity);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < hw; ++i) {
      const float a = src[c * hw + i];
      const float burned = std::clamp(a - (1.0f - wm[i]), 0.0f, 1.0f);
      dst[c * hw + i] = a + k * (burned - a);
    }
  return out;
}

Degraded apply_wrinkle(const Tensor<float>& image, const DegradationSpec& spec) {
  require_rgb(image, "apply_wrinkle");
  spec.validate();
  Tensor<float> map = wrinkle_map(image.dim(1), image.dim(2), spec);
  return {linear_burn(image, map, spec.intensity), map};
}

Degraded apply_bleed(const Tensor<float>& image, const DegradationSpec& spec) {
  require_rgb(image, "apply_bleed");
  spec.validate();
  const auto& g = spec.bleed;
  const std::int64_t h = image.dim(1), w = image.dim(2), hw = h * w;
  auto src = image.data();
  std::vector<float> ink(static_cast<std::size_t>(hw), 0.0f);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      // Back side of the page: mirrored and slightly misregistered.
      std::int64_t sx = (g.flip_horizontal ? w - 1 - x : x) + g.offset_x;
      std::int64_t sy = (g.flip_horizontal ? y : h - 1 - y) + g.offset_y;
      if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
      const std::int64_t i = sy * w + sx;
      const double luma = 0.299 * src[i] + 0.587 * src[hw + i] + 0.114 * src[2 * hw + i];
      ink[y * w + x] = luma < g.ink_threshold ? 1.0f : 0.0f;
    }
  const auto soft = blur(ink, h, w, g.blur_sigma);
  Tensor<float> blend(Shape{1, h, w});
  auto b = blend.mutable_data();
  for (std::int64_t i = 0; i < hw; ++i) b[i] = static_cast<float>(spec.intensity) * std::clamp(soft[i], 0.0f, 1.0f);
  return {darken(image, blend), blend};
}

Tensor<float> sobel_magnitude(const Tensor<float>& map) {
  if (map.ndim() != 3 || map.dim(0) != 1) throw ShapeError("sobel_magnitude: expected 1 x H x W");
  const std::int64_t h = map.dim(1), w = map.dim(2);
  auto m = map.data();
  auto at = [&](std::int64_t y, std::int64_t x) {
    return static_cast<double>(m[std::clamp(y, std::int64_t{0}, h - 1) * w + std::clamp(x, std::int64_t{0}, w - 1)]);
  };
  Tensor<float> out(map.shape());
  auto o = out.mutable_data();
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      o[y * w + x] = static_cast<float>(std::min(1.0, std::sqrt(gx * gx + gy * gy) / 4.0));
    }
  return out;
}

Tensor<float> extract_prior(const Tensor<float>& map, DegradationKind kind, double intensity) {
  if (kind == DegradationKind::Wrinkle) {
    Tensor<float> scaled(map.shape());
    auto src = map.data();
    auto dst = scaled.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(1.0 - intensity * (1.0 - src[i]));
    return thresholded_edges(scaled);
  }
  Tensor<float> prior = thresholded_edges(map);
  auto p = prior.mutable_data();
  auto src = map.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i] + src[i], 0.0f, 1.0f);
  return prior;
}

SamplePair synthesize_sample(const Tensor<float>& gt, const std::vector<DegradationSpec>& specs) {
  require_rgb(gt, "synthesize_sample");
  std::array<const DegradationSpec*, kDegradationTypes> by_kind{};
  for (const auto& s : specs) {
    auto& slot = by_kind[static_cast<int>(s.kind)];
    if (slot) throw std::invalid_argument("synthesize_sample: duplicate degradation kind " + std::string(kind_name(s.kind)));
    slot = &s;
  }
  const std::int64_t h = gt.dim(1), w = gt.dim(2), hw = h * w;
  SamplePair pair;
  pair.ground_truth = gt;
  pair.specs = specs;
  pair.priors = Tensor<float>(Shape{kDegradationTypes, h, w});
  Tensor<float> current = gt.clone();
  for (auto kind : {DegradationKind::Bleed, DegradationKind::Wrinkle, DegradationKind::Shadow}) {
    const DegradationSpec* spec = by_kind[static_cast<int>(kind)];
    if (!spec) continue;
    Degraded d = kind == DegradationKind::Bleed     ? apply_bleed(current, *spec)
                 : kind == DegradationKind::Wrinkle ? apply_wrinkle(current, *spec)
                                                    : apply_shadow(current, *spec);
    current = d.image;
    const Tensor<float> prior = extract_prior(d.map, kind, spec->intensity);
    auto dst = pair.priors.mutable_data();
    auto src = prior.data();
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<int>(kind) * hw);
  }
  pair.degraded = current;
  return pair;
}

std::vector<DegradationSpec> random_specs(Rng& rng, double min_intensity) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DegradationSpec> specs;
  std::array<bool, kDegradationTypes> use{};
  for (auto& b : use) b = u(rng) < 0.6;
  if (std::none_of(use.begin(), use.end(), [](bool b) { return b; })) {
    use[static_cast<std::size_t>(3 * u(rng)) % kDegradationTypes] = true;
  }
  for (int k = 0; k < kDegradationTypes; ++k) {
    if (use[k]) specs.push_back(DegradationSpec::random(kAllKinds[k], rng, min_intensity));
  }
  return specs;
}

Tensor<float> synthetic_page(std::int64_t height, std::int64_t width, std::uint64_t seed) {
  if (height <= 0 || width <= 0) throw ShapeError("synthetic_page: extents must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::int64_t hw = height * width;
  Tensor<float> page(Shape{3, height, width});
  auto p = page.mutable_data();
  const std::array<double, 3> paper = {0.93 + 0.07 * u(rng), 0.91 + 0.08 * u(rng), 0.85 + 0.12 * u(rng)};
  for (int c = 0; c < 3; ++c) std::fill(p.begin() + c * hw, p.begin() + (c + 1) * hw, static_cast<float>(paper[c]));

  auto fill = [&](std::int64_t y0, std::int64_t x0, std::int64_t y1, std::int64_t x1, std::array<double, 3> rgb) {
    y0 = std::clamp<std::int64_t>(y0, 0, height);
    y1 = std::clamp<std::int64_t>(y1, 0, height);
    x0 = std::clamp<std::int64_t>(x0, 0, width);
    x1 = std::clamp<std::int64_t>(x1, 0, width);
    for (std::int64_t y = y0; y < y1; ++y)
      for (std::int64_t x = x0; x < x1; ++x)
        for (int c = 0; c < 3; ++c) p[c * hw + y * width + x] = static_cast<float>(rgb[c]);
  };

  const std::int64_t margin = std::max<std::int64_t>(2, width / 16);
  const std::int64_t line = std::max<std::int64_t>(4, height / 14);
  const std::int64_t glyph_h = std::max<std::int64_t>(2, line * 3 / 5);
  const std::array<double, 3> ink = {0.05 + 0.1 * u(rng), 0.05 + 0.1 * u(rng), 0.1 + 0.25 * u(rng)};
  const std::array<double, 3> accent = {0.6 + 0.3 * u(rng), 0.1 + 0.2 * u(rng), 0.1 + 0.3 * u(rng)};

  // Figure block on the right of a band of lines.
  const std::int64_t fig_y0 = height / 3 + static_cast<std::int64_t>(u(rng) * height / 6);
  const std::int64_t fig_y1 = fig_y0 + height / 5;
  const std::int64_t fig_x0 = width / 2 + static_cast<std::int64_t>(u(rng) * width / 8);
  const std::array<double, 3> fig = {0.2 + 0.6 * u(rng), 0.3 + 0.5 * u(rng), 0.4 + 0.5 * u(rng)};
  for (std::int64_t y = fig_y0; y < std::min(fig_y1, height); ++y)
    for (std::int64_t x = fig_x0; x < width - margin; ++x) {
      const double t = static_cast<double>(x - fig_x0) / static_cast<double>(std::max<std::int64_t>(1, width - margin - fig_x0));
      for (int c = 0; c < 3; ++c) p[c * hw + y * width + x] = static_cast<float>(fig[c] * (0.6 + 0.4 * t));
    }

  for (std::int64_t top = margin, row = 0; top + glyph_h < height - margin; top += line, ++row) {
    const bool heading = row == 0 || u(rng) < 0.12;
    const auto colour = heading ? accent : ink;
    const std::int64_t gh = heading ? std::min(line - 1, glyph_h + 1) : glyph_h;
    const bool beside_figure = top + gh > fig_y0 && top < fig_y1;
    const std::int64_t right = beside_figure ? fig_x0 - margin : width - margin;
    std::int64_t x = margin + (heading ? 0 : static_cast<std::int64_t>(u(rng) * 3));
    const std::int64_t line_end = row > 0 && u(rng) < 0.2 ? margin + (right - margin) / 2 : right;
    while (x < line_end) {
      const std::int64_t word = 2 + static_cast<std::int64_t>(u(rng) * 7);
      for (std::int64_t k = 0; k < word && x < line_end; ++k, x += 2) {
        // One glyph: a stroke with an occasional ascender or crossbar.
        const std::int64_t asc = u(rng) < 0.3 ? 1 : 0;
        fill(top - asc, x, top + gh, x + 1, colour);
        if (u(rng) < 0.4) fill(top + gh / 2, x, top + gh / 2 + 1, x + 2, colour);
      }
      x += 2 + static_cast<std::int64_t>(u(rng) * 2);
    }
  }

  // Stamp ring.
  const double sr = std::max(3.0, std::min(height, width) * (0.07 + 0.05 * u(rng)));
  const double scx = width * (0.2 + 0.6 * u(rng)), scy = height * (0.65 + 0.25 * u(rng));
  const std::array<double, 3> stamp = {0.75 + 0.2 * u(rng), 0.15 * u(rng), 0.2 + 0.3 * u(rng)};
  for (std::int64_t y = 0; y < height; ++y)
    for (std::int64_t x = 0; x < width; ++x) {
      const double d = std::hypot(x + 0.5 - scx, y + 0.5 - scy);
      if (std::abs(d - sr) < 1.0)
        for (int c = 0; c < 3; ++c) p[c * hw + y * width + x] = static_cast<float>(stamp[c]);
    }
  return page;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Manifest build_dataset(const std::vector<Tensor<float>>& gts, const std::filesystem::path& out_dir,
                       const DatasetOptions& options) {
  namespace fs = std::filesystem;
  if (gts.empty()) throw std::invalid_argument("build_dataset: no ground-truth images");
  if (options.count_per_gt < 1) throw std::invalid_argument("build_dataset: count per image must be positive");
  std::error_code ec;
  for (const char* sub : {"degraded", "gt", "prior"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  Manifest manifest;
  manifest.root = out_dir;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (int v = 0; v < options.count_per_gt; ++v) {
      char id[32];
      std::snprintf(id, sizeof id, "g%04zu_v%02d", g, v);
      ManifestRow row;
      row.id = id;
      row.seed = splitmix64(options.seed ^ splitmix64(g * 1000003ULL + static_cast<std::uint64_t>(v)));
      row.split = static_cast<double>(fnv1a(row.id) % 1000) < options.test_fraction * 1000.0 ? "test" : "train";
      Rng rng(row.seed);
      const auto specs = random_specs(rng, options.min_intensity);
      for (const auto& s : specs) {
        row.kinds.push_back(s.kind);
        row.intensities.push_back(s.intensity);
      }
      const SamplePair pair = synthesize_sample(gts[g], specs);
      row.degraded = "degraded/" + row.id + ".png";
      row.ground_truth = "gt/" + row.id + ".png";
      write_png(out_dir / row.degraded, pair.degraded);
      write_png(out_dir / row.ground_truth, pair.ground_truth);
      for (int k = 0; k < kDegradationTypes; ++k) {
        row.priors[k] = "prior/" + row.id + "_" + std::string(kind_name(kAllKinds[k])) + ".png";
        write_png(out_dir / row.priors[k], slice(pair.priors, k, k + 1));
      }
      manifest.rows.push_back(std::move(row));
    }
  }
  write_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << kManifestHeader << '\n';
    for (const auto& r : manifest.rows) {
      out << r.id << ',' << r.split << ',' << join_kinds(r.kinds) << ',';
      for (std::size_t i = 0; i < r.intensities.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", r.intensities[i]);
        out << (i ? "+" : "") << buf;
      }
      if (r.intensities.empty()) out << "none";
      out << ',' << r.seed << ',' << r.degraded << ',' << r.ground_truth;
      for (const auto& p : r.priors) out << ',' << p;
      out << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place");
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw IoError("invalid manifest header in " + path.string());
  }
  Manifest m;
  m.root = path.parent_path();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    ManifestRow r;
    r.id = f[0];
    r.split = f[1];
    if (f[2] != "none")
      for (const auto& k : split(f[2], '+')) r.kinds.push_back(parse_kind(k));
    if (f[3] != "none")
      for (const auto& v : split(f[3], '+')) r.intensities.push_back(std::stod(v));
    r.seed = std::stoull(f[4]);
    r.degraded = f[5];
    r.ground_truth = f[6];
    for (int k = 0; k < kDegradationTypes; ++k) r.priors[k] = f[7 + k];
    m.rows.push_back(std::move(r));
  }
  return m;
}

std::vector<Sample> load_samples(const Manifest& manifest, std::optional<std::string> split_name) {
  std::vector<Sample> out;
  for (const auto& r : manifest.rows) {
    if (split_name && r.split != *split_name) continue;
    Sample s;
    s.id = r.id;
    s.degraded = read_png_rgb(manifest.root / r.degraded);
    s.ground_truth = read_png_rgb(manifest.root / r.ground_truth);
    std::vector<Tensor<float>> channels;
    for (const auto& p : r.priors) channels.push_back(read_png_gray(manifest.root / p));
    s.priors = concat(channels);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace docstormer
