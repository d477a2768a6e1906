#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "docstormer/degrade.hpp"
#include "docstormer/image.hpp"

using namespace docstormer;
namespace fs = std::filesystem;

namespace {

Tensorf page(std::uint64_t seed, std::int64_t h = 64, std::int64_t w = 64) { return synthetic_page(h, w, seed); }

DegradationSpec spec_of(DegradationKind kind, double intensity, std::uint64_t seed = 7) {
  Rng rng(seed);
  DegradationSpec s = DegradationSpec::random(kind, rng);
  s.intensity = intensity;
  return s;
}

bool bit_identical(const Tensorf& a, const Tensorf& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool any_nonzero(const Tensorf& t) {
  return std::any_of(t.data().begin(), t.data().end(), [](float v) { return v != 0.f; });
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("docstormer_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(Shadow, ZeroIntensityIsNoOpAndFullOcclusionIsBlack) {
  const Tensorf img = page(1);
  Degraded none = apply_shadow(img, spec_of(DegradationKind::Shadow, 0.0));
  EXPECT_TRUE(bit_identical(none.image, img));
  EXPECT_FALSE(any_nonzero(none.map));

  DegradationSpec full = spec_of(DegradationKind::Shadow, 1.0);
  full.shadow = ShadowGeometry{0.5, 0.5, 0.3, 0.3, 0.0, 0.1};
  Degraded d = apply_shadow(img, full);
  // The centre lies well inside the unfeathered core, where m == 1.
  for (int c = 0; c < 3; ++c) EXPECT_EQ(d.image.at({c, 32, 32}), 0.f);
  EXPECT_EQ(d.map.at({0, 32, 32}), 1.f);
}

TEST(Wrinkle, WhiteMapAndZeroIntensityAreNoOps) {
  const Tensorf img = page(2);
  EXPECT_TRUE(bit_identical(linear_burn(img, Tensorf::ones({1, 64, 64}), 0.8), img));
  EXPECT_TRUE(bit_identical(apply_wrinkle(img, spec_of(DegradationKind::Wrinkle, 0.0)).image, img));
}

TEST(Wrinkle, LinearBurnHandValue) {
  Tensorf out = linear_burn(Tensorf::ones({3, 4, 4}), Tensorf({1, 4, 4}, 0.5f), 1.0);
  for (float v : out.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Wrinkle, MapInUnitRangeAndSeedDeterministic) {
  const auto s = spec_of(DegradationKind::Wrinkle, 1.0, 3);
  const Tensorf a = wrinkle_map(40, 56, s), b = wrinkle_map(40, 56, s);
  EXPECT_TRUE(bit_identical(a, b));
  for (float v : a.data()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
  EXPECT_FALSE(bit_identical(a, wrinkle_map(40, 56, spec_of(DegradationKind::Wrinkle, 1.0, 4))));
}

TEST(Bleed, ZeroIntensityAndBlankPageAreNoOps) {
  const Tensorf img = page(3);
  EXPECT_TRUE(bit_identical(apply_bleed(img, spec_of(DegradationKind::Bleed, 0.0)).image, img));
  const Tensorf blank = Tensorf::ones({3, 32, 32});
  Degraded d = apply_bleed(blank, spec_of(DegradationKind::Bleed, 1.0));
  EXPECT_TRUE(bit_identical(d.image, blank));
  EXPECT_FALSE(any_nonzero(d.map));
}

TEST(Degradations, DarkeningNeverBrightens) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensorf img = page(100 + seed, 48, 40);
    Rng rng(seed);
    for (auto kind : {DegradationKind::Shadow, DegradationKind::Bleed}) {
      const DegradationSpec s = DegradationSpec::random(kind, rng, 0.0);
      const Tensorf out = (kind == DegradationKind::Shadow ? apply_shadow(img, s) : apply_bleed(img, s)).image;
      for (std::int64_t i = 0; i < img.numel(); ++i) ASSERT_LE(out.data()[i], img.data()[i]) << kind_name(kind);
    }
  }
}

TEST(Degradations, ZeroIntensitySpecsAreExactNoOps) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensorf img = page(200 + seed, 32, 48);
    Rng rng(seed);
    std::vector<DegradationSpec> specs;
    for (auto kind : {DegradationKind::Shadow, DegradationKind::Wrinkle, DegradationKind::Bleed}) {
      DegradationSpec s = DegradationSpec::random(kind, rng);
      s.intensity = 0.0;
      specs.push_back(s);
    }
    const SamplePair pair = synthesize_sample(img, specs);
    EXPECT_TRUE(bit_identical(pair.degraded, img));
    EXPECT_FALSE(any_nonzero(pair.priors));
  }
}

TEST(Prior, SobelHandCases) {
  EXPECT_FALSE(any_nonzero(sobel_magnitude(Tensorf({1, 6, 6}, 0.4f))));
  Tensorf step(Shape{1, 6, 6});
  for (std::int64_t y = 0; y < 6; ++y)
    for (std::int64_t x = 3; x < 6; ++x) step.mutable_data()[y * 6 + x] = 1.f;
  const Tensorf s = sobel_magnitude(step);
  for (std::int64_t y = 0; y < 6; ++y) {
    EXPECT_FLOAT_EQ(s.at({0, y, 2}), 1.f);
    EXPECT_FLOAT_EQ(s.at({0, y, 3}), 1.f);
    EXPECT_FLOAT_EQ(s.at({0, y, 0}), 0.f);
  }
  const Tensorf prior = extract_prior(step, DegradationKind::Wrinkle);
  EXPECT_FLOAT_EQ(prior.at({0, 2, 2}), 1.f);
  EXPECT_FLOAT_EQ(prior.at({0, 2, 5}), 0.f);
}

TEST(Prior, ConstantAndZeroMapsGiveZeroPriors) {
  EXPECT_FALSE(any_nonzero(extract_prior(Tensorf({1, 8, 8}, 0.6f), DegradationKind::Wrinkle)));
  EXPECT_FALSE(any_nonzero(extract_prior(Tensorf::zeros({1, 8, 8}), DegradationKind::Shadow)));
  EXPECT_FALSE(any_nonzero(extract_prior(Tensorf::zeros({1, 8, 8}), DegradationKind::Bleed)));
}

TEST(Prior, ChannelNonzeroExactlyWhenApplied) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto specs = random_specs(rng);
    const SamplePair pair = synthesize_sample(page(300 + seed), specs);
    for (int k = 0; k < kDegradationTypes; ++k) {
      const bool applied = std::any_of(specs.begin(), specs.end(), [&](const auto& s) { return int(s.kind) == k; });
      EXPECT_EQ(any_nonzero(slice(pair.priors, k, k + 1)), applied) << "seed " << seed << " channel " << k;
    }
  }
}

TEST(Synthesize, EmptySpecsAndDeterminism) {
  const Tensorf img = page(4);
  const SamplePair none = synthesize_sample(img, {});
  EXPECT_TRUE(bit_identical(none.degraded, img));
  EXPECT_FALSE(any_nonzero(none.priors));

  Rng r1(5), r2(5);
  const SamplePair a = synthesize_sample(img, random_specs(r1)), b = synthesize_sample(img, random_specs(r2));
  EXPECT_TRUE(bit_identical(a.degraded, b.degraded));
  EXPECT_TRUE(bit_identical(a.priors, b.priors));
}

TEST(Synthesize, AllThreeKindsGiveThreeNonzeroPriors) {
  std::vector<DegradationSpec> specs;
  Rng rng(6);
  for (auto kind : {DegradationKind::Shadow, DegradationKind::Wrinkle, DegradationKind::Bleed})
    specs.push_back(DegradationSpec::random(kind, rng, 0.8));
  const SamplePair pair = synthesize_sample(page(5), specs);
  for (int k = 0; k < kDegradationTypes; ++k) EXPECT_TRUE(any_nonzero(slice(pair.priors, k, k + 1))) << k;
  for (float v : pair.priors.data()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}

TEST(Synthesize, RejectsDuplicateKindsAndBadSpecs) {
  Rng rng(7);
  auto s = DegradationSpec::random(DegradationKind::Shadow, rng);
  EXPECT_THROW(synthesize_sample(page(6), {s, s}), std::invalid_argument);
  s.intensity = 1.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(parse_kind("smudge"), std::invalid_argument);
  EXPECT_EQ(parse_kind(kind_name(DegradationKind::Bleed)), DegradationKind::Bleed);
}

TEST(Dataset, RowCountSplitAndPriorRange) {
  TempDir dir;
  std::vector<Tensorf> gts;
  for (int i = 0; i < 10; ++i) gts.push_back(page(400 + i, 32, 32));
  DatasetOptions options;
  options.count_per_gt = 4;
  options.seed = 11;
  const Manifest m = build_dataset(gts, dir.path(), options);
  ASSERT_EQ(m.rows.size(), 40u);
  const Manifest back = read_manifest(dir.path() / "manifest.csv");
  ASSERT_EQ(back.rows.size(), 40u);
  std::size_t tests = 0;
  for (const auto& row : back.rows) {
    tests += row.split == "test";
    EXPECT_EQ(row.split, fnv1a(row.id) % 1000 < 200 ? "test" : "train");
    EXPECT_EQ(row.kinds.size(), row.intensities.size());
    for (const auto& p : row.priors) {
      const Tensorf prior = read_png_gray(dir.path() / p);
      EXPECT_EQ(prior.shape(), (Shape{1, 32, 32}));
      for (float v : prior.data()) {
        EXPECT_GE(v, 0.f);
        EXPECT_LE(v, 1.f);
      }
    }
  }
  EXPECT_GT(tests, 0u);
  EXPECT_LT(tests, 40u);
  const auto samples = load_samples(back, "train");
  EXPECT_EQ(samples.size(), 40u - tests);
  EXPECT_EQ(samples.front().priors.shape(), (Shape{kDegradationTypes, 32, 32}));
}

TEST(Dataset, RebuildWithSameSeedIsByteIdentical) {
  TempDir a, b;
  std::vector<Tensorf> gts = {page(500, 32, 40), page(501, 32, 40)};
  DatasetOptions options;
  options.count_per_gt = 3;
  options.seed = 99;
  build_dataset(gts, a.path(), options);
  build_dataset(gts, b.path(), options);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(fnv1a(file_bytes(entry.path())), fnv1a(file_bytes(b.path() / rel))) << rel;
    ++files;
  }
  EXPECT_EQ(files, 6u * 5u + 1u);  // degraded, gt, 3 priors per row, manifest

  options.seed = 100;
  TempDir c;
  build_dataset(gts, c.path(), options);
  EXPECT_NE(file_bytes(a.path() / "manifest.csv"), file_bytes(c.path() / "manifest.csv"));
}

TEST(Dataset, ManifestRejectsBadHeader) {
  TempDir dir;
  std::ofstream(dir.path() / "manifest.csv") << "id,split\n";
  EXPECT_THROW(read_manifest(dir.path() / "manifest.csv"), std::runtime_error);
}

TEST(Page, DeterministicAndInRange) {
  const Tensorf a = page(8, 40, 30), b = page(8, 40, 30);
  EXPECT_TRUE(bit_identical(a, b));
  EXPECT_EQ(a.shape(), (Shape{3, 40, 30}));
  for (float v : a.data()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}
