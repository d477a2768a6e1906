#include <gtest/gtest.h>

#include "docstormer/losses.hpp"
#include "docstormer/networks.hpp"

using namespace docstormer;

namespace {

Tensorf random_image(std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed, float lo = 0.f,
                     float hi = 1.f) {
  Rng rng(seed);
  return init::uniform<float>(Shape{c, h, w}, lo, hi, rng);
}

bool bit_identical(const Tensorf& a, const Tensorf& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(Presets, KnownNamesAndChannelLists) {
  const auto paper = model_preset("paper");
  EXPECT_EQ(paper.dp.channels, (std::array<int, kLevels>{18, 36, 54, 72}));
  EXPECT_EQ(paper.dr.channels, (std::array<int, kLevels>{36, 72, 108, 144}));
  const auto tiny = model_preset("tiny");
  EXPECT_EQ(tiny.dp.channels, (std::array<int, kLevels>{4, 8, 12, 16}));
  EXPECT_EQ(tiny.dr.channels, (std::array<int, kLevels>{8, 16, 24, 32}));
  EXPECT_THROW(model_preset("huge"), std::invalid_argument);
}

TEST(Presets, ParameterCountsAreStable) {
  const std::pair<const char*, std::array<std::int64_t, 3>> expected[] = {
      {"tiny", {16235, 71468, 12332}}, {"small", {20497, 148550, 178268}}, {"paper", {320971, 2549268, 700572}}};
  for (const auto& [name, counts] : expected) {
    const auto cfg = model_preset(name);
    DocStormer<float> model(cfg, 0);
    Rng rng(0);
    Discriminator<float> critic(cfg.disc, rng);
    EXPECT_EQ(model.dp().params().element_count(), counts[0]) << name;
    EXPECT_EQ(model.dr().params().element_count(), counts[1]) << name;
    EXPECT_EQ(critic.params().element_count(), counts[2]) << name;
  }
}

TEST(DpNet, PaperPresetShapes) {
  Rng rng(1);
  DpNet<float> net(model_preset("paper").dp, rng);
  TapeScope no_tape(nullptr);
  auto out = net.forward(random_image(3, 256, 256, 2));
  EXPECT_EQ(out.priors.shape(), (Shape{3, 256, 256}));
  const std::array<Shape, kLevels> expected = {Shape{18, 256, 256}, Shape{36, 128, 128}, Shape{54, 64, 64},
                                               Shape{72, 32, 32}};
  for (int l = 0; l < kLevels; ++l) EXPECT_EQ(out.rep.features[l].shape(), expected[l]) << "level " << l;
}

TEST(DpNet, PriorsInUnitRangeAndFeatureScales) {
  Rng rng(3);
  DpNet<float> net(model_preset("tiny").dp, rng);
  auto out = net.forward(random_image(3, 48, 40, 4));
  for (float v : out.priors.data()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
  for (int l = 0; l < kLevels; ++l) {
    EXPECT_EQ(out.rep.features[l].dim(1), 48 / kScaleFactors[l]);
    EXPECT_EQ(out.rep.features[l].dim(2), 40 / kScaleFactors[l]);
  }
}

TEST(DpNet, DeterministicUnderFixedSeed) {
  const Tensorf x = random_image(3, 32, 32, 5);
  Tensorf first;
  for (int run = 0; run < 2; ++run) {
    Rng rng(42);
    DpNet<float> net(model_preset("tiny").dp, rng);
    Tensorf p = net.forward(x).priors;
    if (run == 0) first = p;
    else EXPECT_TRUE(bit_identical(first, p));
  }
}

TEST(DpNet, RejectsIndivisibleExtents) {
  Rng rng(6);
  DpNet<float> net(model_preset("tiny").dp, rng);
  EXPECT_THROW(net.forward(random_image(3, 30, 32, 7)), ShapeError);
}

TEST(FeatureFuse, ProjectsConcatenationToLevelWidth) {
  Rng rng(8);
  ParameterSet<float> params;
  FeatureFusion<float> fuse({72, 72, 36}, 72, params, "fuse", rng);
  EXPECT_EQ(fuse.weight().shape(), (Shape{72, 180}));
  Tensorf y = fuse.forward({random_image(72, 4, 4, 9), random_image(72, 4, 4, 10), random_image(36, 4, 4, 11)});
  EXPECT_EQ(y.shape(), (Shape{72, 4, 4}));
}

TEST(FeatureFuse, IdentityExtendedProjectionSelectsDecoder) {
  // Projection [0 | I | 0] with zero encoder and perceptive features.
  const int c = 3, cf = 2;
  Tensorf w(Shape{c, 2 * c + cf});
  for (int i = 0; i < c; ++i) w.mutable_data()[i * (2 * c + cf) + c + i] = 1.f;
  Tensorf dec = random_image(c, 5, 4, 12);
  Tensorf y = feature_fuse(Tensorf::zeros({c, 5, 4}), dec, Tensorf::zeros({cf, 5, 4}), w);
  EXPECT_TRUE(bit_identical(y, dec));
}

TEST(FeatureFuse, GradientReachesAllThreeInputs) {
  Tensorf enc = random_image(2, 3, 3, 13).set_requires_grad(true);
  Tensorf dec = random_image(2, 3, 3, 14).set_requires_grad(true);
  Tensorf f = random_image(3, 3, 3, 15).set_requires_grad(true);
  Tensorf w = random_image(2, 1, 7, 16, -1.f, 1.f);
  w = reshape(w, Shape{2, 7});
  Tensorf r = random_image(2, 3, 3, 17, -1.f, 1.f);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(sum(mul(feature_fuse(enc, dec, f, w), r)), tape);
  }
  for (const Tensorf* t : {&enc, &dec, &f}) {
    double norm = 0;
    for (float g : t->grad()) norm += std::abs(g);
    EXPECT_GT(norm, 0.0);
  }
}

TEST(FeatureFuse, RejectsSpatialMismatch) {
  Tensorf w(Shape{2, 6});
  EXPECT_THROW(feature_fuse(Tensorf::zeros({2, 4, 4}), Tensorf::zeros({2, 4, 4}), Tensorf::zeros({2, 2, 2}), w),
               ShapeError);
}

TEST(DrNet, ShapeAndZeroFinalProjectionIdentity) {
  const auto cfg = model_preset("tiny");
  Rng rng(18);
  DpNet<float> dp(cfg.dp, rng);
  DrNet<float> dr(cfg.dr, cfg.dp, rng);
  TapeScope no_tape(nullptr);
  Tensorf x = random_image(3, 32, 24, 19);
  auto rep = dp.forward(x).rep;
  EXPECT_EQ(dr.forward(x, rep).shape(), x.shape());
  dr.zero_final_projection();
  EXPECT_TRUE(bit_identical(dr.forward(x, rep), x));
}

TEST(DrNet, RejectsIndivisibleExtentsAndScaleMismatch) {
  const auto cfg = model_preset("tiny");
  Rng rng(20);
  DpNet<float> dp(cfg.dp, rng);
  DrNet<float> dr(cfg.dr, cfg.dp, rng);
  TapeScope no_tape(nullptr);
  auto rep = dp.forward(random_image(3, 32, 32, 21)).rep;
  EXPECT_THROW(dr.forward(random_image(3, 36, 32, 22), rep), ShapeError);
  EXPECT_THROW(dr.forward(random_image(3, 40, 32, 22), rep), ShapeError);
}

TEST(DocStormer, ShapesRangeAndOddExtents) {
  DocStormer<float> model(model_preset("tiny"), 23);
  TapeScope no_tape(nullptr);
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{64, 64}, {37, 50}}) {
    auto out = model.forward(random_image(3, h, w, 24));
    EXPECT_EQ(out.enhanced.shape(), (Shape{3, h, w}));
    EXPECT_EQ(out.priors.shape(), (Shape{kDegradationTypes, h, w}));
    for (float v : out.enhanced.data()) {
      EXPECT_GE(v, 0.f);
      EXPECT_LE(v, 1.f);
    }
  }
}

TEST(DocStormer, ZeroedProjectionsGiveIdentity) {
  DocStormer<float> model(model_preset("tiny"), 25);
  model.zero_output_projections();
  TapeScope no_tape(nullptr);
  Tensorf x = random_image(3, 40, 24, 26);
  EXPECT_TRUE(bit_identical(model.forward(x).enhanced, x));
}

TEST(DocStormer, RestorationGradientReachesPerceptionEncoder) {
  DocStormer<float> model(model_preset("tiny"), 27);
  Tensorf x = random_image(3, 32, 32, 28);
  Tensorf gt = random_image(3, 32, 32, 29);
  Tensorf pgt = random_image(kDegradationTypes, 32, 32, 30);
  Tape tape;
  {
    TapeScope scope(&tape);
    auto out = model.forward(x);
    backward(l_ds(out.enhanced, gt, out.priors, pgt), tape);
  }
  const Tensorf embed = model.dp().params().entries().front().second;
  ASSERT_TRUE(embed.has_grad());
  double norm = 0;
  for (float g : embed.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(DocStormer, ParameterSetAliasesSubnets) {
  DocStormer<float> model(model_preset("tiny"), 31);
  auto all = model.params();
  EXPECT_EQ(all.element_count(), model.dp().params().element_count() + model.dr().params().element_count());
  EXPECT_TRUE(all.entries().front().second.same_node(model.dp().params().entries().front().second));
}

TEST(Discriminator, ScalarScoreAndZeroWeights) {
  DiscriminatorConfig cfg;
  cfg.widths = {4, 8};
  cfg.input_size = 16;
  Rng rng(32);
  Discriminator<float> critic(cfg, rng);
  Tensorf s = critic.score(random_image(3, 16, 16, 33));
  EXPECT_EQ(s.numel(), 1);
  EXPECT_TRUE(std::isfinite(s.item()));
  critic.zero_weights();
  EXPECT_EQ(critic.score(random_image(3, 16, 16, 34)).item(), 0.f);
  EXPECT_THROW(critic.score(random_image(3, 8, 16, 35)), ShapeError);
}

TEST(Discriminator, InputGradientMatchesFiniteDifferenceOnOnePixel) {
  DiscriminatorConfig cfg;
  cfg.widths = {4, 8};
  cfg.input_size = 16;
  Rng rng(36);
  Discriminator<double> critic(cfg, rng);
  Rng img_rng(37);
  Tensord x = init::uniform<double>(Shape{3, 16, 16}, 0.0, 1.0, img_rng);
  TapeScope no_tape(nullptr);
  const Tensord g = critic.input_gradient(x);
  ASSERT_EQ(g.shape(), x.shape());
  for (std::int64_t idx : {0L, 5 * 16 + 7L, 2 * 256 + 15 * 16 + 15L}) {
    const double h = 1e-6;
    Tensord p = x.clone(), m = x.clone();
    p.mutable_data()[idx] += h;
    m.mutable_data()[idx] -= h;
    const double fd = (critic.score(p).item() - critic.score(m).item()) / (2 * h);
    EXPECT_NEAR(g.data()[idx], fd, 1e-7 + 1e-5 * std::abs(fd)) << "pixel " << idx;
  }
}

TEST(Discriminator, InputGradientMatchesTapeGradient) {
  DiscriminatorConfig cfg;
  cfg.widths = {3, 5, 6};
  cfg.input_size = 16;
  Rng rng(38);
  Discriminator<double> critic(cfg, rng);
  Rng img_rng(39);
  Tensord x = init::uniform<double>(Shape{3, 16, 16}, 0.0, 1.0, img_rng).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(critic.score(x), tape);
  }
  TapeScope no_tape(nullptr);
  const Tensord g = critic.input_gradient(x.detach());
  for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(g.data()[i], x.grad()[i], 1e-12);
}
