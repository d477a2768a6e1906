#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "docstormer/networks.hpp"

// Synthetic document degradations (shadow, wrinkle, ink bleed-through), the
// per-type prior maps derived from them, and dataset generation.

namespace docstormer {

enum class DegradationKind { Shadow = 0, Wrinkle = 1, Bleed = 2 };

std::string_view kind_name(DegradationKind kind);
DegradationKind parse_kind(std::string_view name);

struct ShadowGeometry {
  // Centre and semi-axes as fractions of width / height.
  double cx = 0.5, cy = 0.5;
  double ax = 0.4, ay = 0.3;
  double angle = 0.0;    // radians
  double feather = 0.3;  // width of the soft edge, in units of the normalized radius
};

struct WrinkleGeometry {
  int creases = 4;
  double angle_jitter = 0.6;  // radians around a dominant fold direction
  double depth = 0.55;        // luminance dip at the crease centre
  double width = 1.6;         // crease half-width in pixels
};

struct BleedGeometry {
  bool flip_horizontal = true;
  double blur_sigma = 1.5;
  double ink_threshold = 0.5;  // luma below this counts as ink
  std::int64_t offset_x = 0, offset_y = 0;
};

struct DegradationSpec {
  DegradationKind kind = DegradationKind::Shadow;
  double intensity = 0.0;
  std::uint64_t seed = 0;
  ShadowGeometry shadow;
  WrinkleGeometry wrinkle;
  BleedGeometry bleed;

  void validate() const;
  /// Random geometry and an intensity drawn from [min_intensity, 1].
  static DegradationSpec random(DegradationKind kind, Rng& rng, double min_intensity = 0.4);
};

struct Degraded {
  Tensor<float> image;  // 3 x H x W
  Tensor<float> map;    // 1 x H x W: blend map (shadow, bleed) or wrinkle luminance map
};

Degraded apply_shadow(const Tensor<float>& image, const DegradationSpec& spec);
Degraded apply_wrinkle(const Tensor<float>& image, const DegradationSpec& spec);
Degraded apply_bleed(const Tensor<float>& image, const DegradationSpec& spec);

/// Procedural creased-paper luminance field in [0, 1] (1 = no crease).
Tensor<float> wrinkle_map(std::int64_t height, std::int64_t width, const DegradationSpec& spec);

/// Linear burn composite of `wrinkle` (1 x H x W) onto `image`, mixed by intensity.
Tensor<float> linear_burn(const Tensor<float>& image, const Tensor<float>& wrinkle, double intensity);

inline constexpr double kEdgeThreshold = 0.1;

/// Sobel gradient magnitude of a 1 x H x W map (replicated borders), divided
/// by 4 so a unit step scores 1, clamped to [0, 1].
Tensor<float> sobel_magnitude(const Tensor<float>& map);

/// Prior map for one degradation. Shadow / bleed: the blend map plus its
/// thresholded edges, clamped. Wrinkle: the thresholded edges of the
/// intensity-scaled wrinkle map 1 - intensity (1 - w).
Tensor<float> extract_prior(const Tensor<float>& map, DegradationKind kind, double intensity = 1.0);

struct SamplePair {
  Tensor<float> degraded;  // 3 x H x W
  Tensor<float> ground_truth;
  Tensor<float> priors;  // T x H x W
  std::vector<DegradationSpec> specs;
};

/// Applies the specs in the fixed order bleed, wrinkle, shadow.
SamplePair synthesize_sample(const Tensor<float>& gt, const std::vector<DegradationSpec>& specs);

/// Random non-empty subset of degradation kinds with random geometry.
std::vector<DegradationSpec> random_specs(Rng& rng, double min_intensity = 0.4);

/// A clean, colourful document-like page: tinted paper, text lines, headings,
/// a figure block and a stamp.
Tensor<float> synthetic_page(std::int64_t height, std::int64_t width, std::uint64_t seed);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

struct ManifestRow {
  std::string id;
  std::string split;  // "train" or "test"
  std::vector<DegradationKind> kinds;
  std::vector<double> intensities;
  std::uint64_t seed = 0;
  std::string degraded, ground_truth;                   // paths relative to the manifest
  std::array<std::string, kDegradationTypes> priors;  // shadow, wrinkle, bleed
};

struct Manifest {
  std::filesystem::path root;  // directory holding manifest.csv
  std::vector<ManifestRow> rows;
};

struct DatasetOptions {
  int count_per_gt = 1;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double min_intensity = 0.4;
};

/// Writes degraded / gt / prior PNGs and manifest.csv under `out_dir`.
Manifest build_dataset(const std::vector<Tensor<float>>& gts, const std::filesystem::path& out_dir,
                       const DatasetOptions& options);

inline constexpr const char* kManifestHeader =
    "id,split,kinds,intensities,seed,degraded,gt,prior_shadow,prior_wrinkle,prior_bleed";

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// A sample decoded from disk.
struct Sample {
  std::string id;
  Tensor<float> degraded, ground_truth, priors;
};

/// Loads every row (or only those in `split`).
std::vector<Sample> load_samples(const Manifest& manifest, std::optional<std::string> split = std::nullopt);

}  // namespace docstormer
