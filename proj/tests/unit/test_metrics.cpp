#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "docstormer/metrics.hpp"
#include "docstormer/params.hpp"
#include "oracles.hpp"

using namespace docstormer;

namespace {

Tensorf random_image(std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  return init::uniform<float>(Shape{c, h, w}, 0.f, 1.f, rng);
}

}  // namespace

TEST(Psnr, CapZeroAndTwentyDecibels) {
  Tensorf a = random_image(3, 10, 10, 1);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_DOUBLE_EQ(psnr(Tensorf::zeros({3, 4, 4}), Tensorf::ones({3, 4, 4})), 0.0);
  // 4 of 100 pixels off by exactly 0.5: MSE = 4 * 0.25 / 100 = 0.01.
  Tensorf x(Shape{1, 10, 10}, 0.25f), y(Shape{1, 10, 10}, 0.25f);
  for (int i : {3, 17, 58, 99}) y.mutable_data()[i] = 0.75f;
  EXPECT_DOUBLE_EQ(psnr(x, y), 20.0);
}

TEST(Psnr, SymmetricAndDecreasingWithNoise) {
  Tensorf clean = random_image(3, 32, 32, 2);
  double previous = kPsnrCap;
  for (double sigma : {0.01, 0.03, 0.1, 0.3}) {
    Rng rng(3);
    std::normal_distribution<double> noise(0.0, sigma);
    Tensorf noisy = clean.clone();
    for (auto& v : noisy.mutable_data()) v = static_cast<float>(v + noise(rng));
    const double p = psnr(clean, noisy);
    EXPECT_DOUBLE_EQ(p, psnr(noisy, clean));
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, IdenticalIsOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensorf a = random_image(3, 20, 25, seed);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  }
}

TEST(Ssim, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensorf a = random_image(3, 32, 32, 10 + seed), b = random_image(3, 32, 32, 20 + seed);
    EXPECT_NEAR(ssim(a, b), oracle::naive_ssim(a, b), 1e-6);
    // A correlated pair exercises the covariance term away from zero.
    Tensorf c = a.clone();
    auto bd = b.data();
    for (std::size_t i = 0; i < c.mutable_data().size(); ++i) c.mutable_data()[i] = 0.8f * c.data()[i] + 0.2f * bd[i];
    EXPECT_NEAR(ssim(a, c), oracle::naive_ssim(a, c), 1e-6);
    EXPECT_DOUBLE_EQ(ssim(a, c), ssim(c, a));
  }
}

TEST(Ssim, NegativeImageScoresLow) {
  // Mid-contrast stripes and their negative.
  Tensorf a(Shape{1, 32, 32});
  for (std::int64_t i = 0; i < 32; ++i)
    for (std::int64_t j = 0; j < 32; ++j) a.mutable_data()[i * 32 + j] = ((i / 4 + j / 4) % 2) ? 0.7f : 0.3f;
  Tensorf neg = a.clone();
  for (auto& v : neg.mutable_data()) v = 1.f - v;
  EXPECT_LT(ssim(a, neg), 0.5);
}

TEST(Ssim, WindowIsNormalized) {
  const auto taps = ssim_window_1d();
  ASSERT_EQ(taps.size(), 11u);
  double total = 0;
  for (double t : taps) total += t;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_EQ(taps[0], taps[10]);
}

TEST(Metrics, RejectMismatchedOrTinyImages) {
  EXPECT_THROW(psnr(Tensorf::zeros({3, 4, 4}), Tensorf::zeros({3, 4, 5})), ShapeError);
  EXPECT_THROW(ssim(Tensorf::zeros({3, 8, 8}), Tensorf::zeros({3, 8, 8})), ShapeError);
}

TEST(Metrics, EvaluateCombinesBoth) {
  Tensorf a = random_image(3, 16, 16, 30), b = random_image(3, 16, 16, 31);
  const auto m = evaluate(a, b);
  EXPECT_EQ(m.psnr_db, psnr(a, b));
  EXPECT_EQ(m.ssim, ssim(a, b));
}
