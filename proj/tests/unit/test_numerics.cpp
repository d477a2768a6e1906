#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "docstormer/gradcheck.hpp"
#include "docstormer/ops.hpp"
#include "docstormer/params.hpp"
#include "docstormer/verify.hpp"

using namespace docstormer;

namespace {

Tensord random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return init::uniform<double>(std::move(shape), lo, hi, rng);
}

template <class T>
void expect_near_all(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << "index " << i;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensorf eye(Shape{2, 2}, {1.f, 0.f, 0.f, 1.f});
  Tensorf m(Shape{2, 2}, {1.f, 2.f, 3.f, 4.f});
  expect_near_all(matmul(eye, m), m, 0.0);
}

TEST(Matmul, RowTimesColumn) {
  Tensorf a(Shape{1, 2}, {1.f, 2.f});
  Tensorf b(Shape{2, 1}, {3.f, 4.f});
  EXPECT_FLOAT_EQ(matmul(a, b).item(), 11.f);
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  Tensord a = random_tensor({3, 4}, 1).set_requires_grad(true);
  Tensord b = random_tensor({4, 2}, 2);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(sum(matmul(a, b)), tape);
  }
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t k = 0; k < 4; ++k)
      EXPECT_NEAR(a.grad()[i * 4 + k], b.at({k, 0}) + b.at({k, 1}), 1e-12);
  auto f = [&](const Tensord& x) { return sum(matmul(x, b)).item(); };
  expect_near_all(finite_diff_grad<double>(f, a, 1e-5), a.grad_tensor(), 1e-8);
}

TEST(Matmul, RejectsInnerDimensionMismatch) {
  EXPECT_THROW(matmul(Tensorf(Shape{2, 3}), Tensorf(Shape{2, 3})), ShapeError);
}

TEST(Softmax, SymmetricPairIsHalf) {
  Tensorf s = softmax(Tensorf(Shape{1, 2}, {0.f, 0.f}), 1);
  EXPECT_FLOAT_EQ(s.data()[0], 0.5f);
  EXPECT_FLOAT_EQ(s.data()[1], 0.5f);
}

TEST(Softmax, HandEvaluatedValues) {
  Tensorf s = softmax(Tensorf(Shape{1, 3}, {1.f, 2.f, 3.f}), 1);
  EXPECT_NEAR(s.data()[0], 0.0900, 1e-4);
  EXPECT_NEAR(s.data()[1], 0.2447, 1e-4);
  EXPECT_NEAR(s.data()[2], 0.6652, 1e-4);
}

TEST(Softmax, ShiftInvariantRowsSumToOneAndPositive) {
  Tensord x = random_tensor({4, 7}, 3, -5, 5);
  Tensord s = softmax(x, 1);
  expect_near_all(softmax(add_scalar(x, 12.5), 1), s, 1e-12);
  for (std::int64_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::int64_t c = 0; c < 7; ++c) {
      EXPECT_GT(s.at({r, c}), 0.0);
      total += s.at({r, c});
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Softmax, ColumnAxis) {
  Tensord x = random_tensor({5, 3}, 4);
  expect_near_all(softmax(x, 0), transpose(softmax(transpose(x), 1)), 1e-12);
}

TEST(LayerNorm, ConstantInputNormalizesToZero) {
  Tensorf x(Shape{4, 1, 1}, 2.5f);
  Tensorf y = layer_norm(x, Tensorf::ones({4}), Tensorf::zeros({4}));
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.f);
}

TEST(LayerNorm, TwoValuesMapToPlusMinusOne) {
  Tensorf x(Shape{2, 1, 1}, {1.f, 3.f});
  Tensorf y = layer_norm(x, Tensorf::ones({2}), Tensorf::zeros({2}));
  EXPECT_NEAR(y.data()[0], -1.f, 1e-4);
  EXPECT_NEAR(y.data()[1], 1.f, 1e-4);
}

TEST(LayerNorm, ChannelMeanIsZero) {
  Tensord x = random_tensor({6, 3, 4}, 5, -3, 3);
  Tensord z = layer_norm(x, Tensord::ones({6}), Tensord::zeros({6}));
  EXPECT_EQ(z.shape(), x.shape());
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 4; ++j) {
      double m = 0;
      for (std::int64_t c = 0; c < 6; ++c) m += z.at({c, i, j});
      EXPECT_NEAR(m / 6, 0.0, 1e-5);
    }
}

TEST(ConvDepthwise, DeltaKernelIsIdentity) {
  Tensord x = random_tensor({2, 5, 6}, 7);
  Tensord k(Shape{2, 3, 3});
  k.mutable_data()[4] = 1.0;
  k.mutable_data()[9 + 4] = 1.0;
  expect_near_all(conv2d_depthwise(x, k), x, 0.0);
}

TEST(ConvDepthwise, AveragingKernelKeepsConstantInterior) {
  Tensord x(Shape{1, 6, 6}, 0.7);
  Tensord k(Shape{1, 3, 3}, 1.0 / 9.0);
  Tensord y = conv2d_depthwise(x, k);
  for (std::int64_t i = 1; i < 5; ++i)
    for (std::int64_t j = 1; j < 5; ++j) EXPECT_NEAR(y.at({0, i, j}), 0.7, 1e-12);
}

TEST(ConvDepthwise, MatchesNestedLoopOracle) {
  for (std::int64_t ks : {3, 5}) {
    Tensord x = random_tensor({1, 5, 5}, 8);
    Tensord k = random_tensor({1, ks, ks}, 9);
    Tensord y = conv2d_depthwise(x, k);
    const std::int64_t r = ks / 2;
    for (std::int64_t i = 0; i < 5; ++i)
      for (std::int64_t j = 0; j < 5; ++j) {
        double acc = 0;
        for (std::int64_t a = 0; a < ks; ++a)
          for (std::int64_t b = 0; b < ks; ++b) {
            const std::int64_t yy = i + a - r, xx = j + b - r;
            if (yy < 0 || yy >= 5 || xx < 0 || xx >= 5) continue;
            acc += x.at({0, yy, xx}) * k.at({0, a, b});
          }
        EXPECT_NEAR(y.at({0, i, j}), acc, 1e-14);
      }
  }
}

TEST(ConvPointwise, IdentityAndChannelSum) {
  Tensord x = random_tensor({2, 3, 4}, 10);
  expect_near_all(conv2d_pointwise(x, Tensord(Shape{2, 2}, {1, 0, 0, 1})), x, 0.0);
  Tensord s = conv2d_pointwise(x, Tensord(Shape{1, 2}, {1, 1}));
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(s.at({0, i, j}), x.at({0, i, j}) + x.at({1, i, j}));
}

TEST(ConvPointwise, EqualsReshapedMatmul) {
  Tensord x = random_tensor({3, 4, 5}, 11);
  Tensord w = random_tensor({2, 3}, 12);
  Tensord expected = reshape(matmul(w, reshape(x, Shape{3, 20})), Shape{2, 4, 5});
  expect_near_all(conv2d_pointwise(x, w), expected, 1e-14);
}

TEST(AdaptivePool, ConstantPreservedAndSameSizeIsIdentity) {
  Tensorf ones = Tensorf::ones({1, 4, 4});
  Tensorf p = adaptive_avg_pool(ones, 2, 2);
  EXPECT_EQ(p.shape(), (Shape{1, 2, 2}));
  for (float v : p.data()) EXPECT_FLOAT_EQ(v, 1.f);
  Tensord x = random_tensor({2, 5, 7}, 13);
  expect_near_all(adaptive_avg_pool(x, 5, 7), x, 0.0);
}

TEST(AdaptivePool, ReachesFixedGridAndConservesMean) {
  Tensord x = random_tensor({1, 64, 64}, 14);
  Tensord p = adaptive_avg_pool(x, 32, 32);
  EXPECT_EQ(p.shape(), (Shape{1, 32, 32}));
  EXPECT_NEAR(mean(p).item(), mean(x).item(), 1e-6);
}

TEST(AdaptivePool, BinsCoverInputWithOverlapWhenUneven) {
  EXPECT_EQ(adaptive_bin(0, 7, 3), (std::pair<std::int64_t, std::int64_t>{0, 3}));
  EXPECT_EQ(adaptive_bin(1, 7, 3), (std::pair<std::int64_t, std::int64_t>{2, 5}));
  EXPECT_EQ(adaptive_bin(2, 7, 3), (std::pair<std::int64_t, std::int64_t>{4, 7}));
}

TEST(Resize, ConstantAndIdentity) {
  Tensorf c(Shape{3, 5, 7}, 0.42f);
  for (auto [h, w] : {std::pair{9, 3}, std::pair{2, 2}, std::pair{16, 11}}) {
    const Tensorf bl = resize_bilinear(c, h, w), bc = resize_bicubic(c, h, w);
    for (float v : bl.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
    for (float v : bc.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
  }
  Tensord x = random_tensor({2, 6, 5}, 15);
  expect_near_all(resize_bilinear(x, 6, 5), x, 0.0);
  expect_near_all(resize_bicubic(x, 6, 5), x, 0.0);
}

TEST(Resize, BilinearRampRowsConstantColumnsMonotone) {
  Tensorf x(Shape{1, 2, 2}, {0.f, 1.f, 0.f, 1.f});
  Tensorf y = resize_bilinear(x, 4, 4);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) {
      EXPECT_FLOAT_EQ(y.at({0, i, j}), y.at({0, 0, j}));
      if (j > 0) EXPECT_GE(y.at({0, i, j}), y.at({0, i, j - 1}));
    }
}

TEST(PixelShuffle, RoundTripAndChannelOrder) {
  Tensord x = random_tensor({3, 4, 6}, 16);
  Tensord u = pixel_unshuffle(x, 2);
  EXPECT_EQ(u.shape(), (Shape{12, 2, 3}));
  EXPECT_DOUBLE_EQ(u.at({1 * 4 + 1 * 2 + 0, 1, 2}), x.at({1, 3, 4}));
  expect_near_all(pixel_shuffle(u, 2), x, 0.0);
}

TEST(ReflectPadCrop, PadMirrorsAndCropRestores) {
  Tensord x = random_tensor({1, 3, 4}, 17);
  Tensord p = reflect_pad(x, 2, 1);
  EXPECT_EQ(p.shape(), (Shape{1, 5, 5}));
  EXPECT_DOUBLE_EQ(p.at({0, 3, 0}), x.at({0, 1, 0}));
  EXPECT_DOUBLE_EQ(p.at({0, 4, 4}), x.at({0, 0, 2}));
  expect_near_all(crop(p, 0, 0, 3, 4), x, 0.0);
}

TEST(Backward, SquareAtThree) {
  Tensord x = Tensord::scalar(3.0).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(mul(x, x), tape);
  }
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Tensord x = random_tensor({1, 6}, 18).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(sum(softmax(x, 1)), tape);
  }
  for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Backward, TapeIsTopologicallyOrdered) {
  Tensord x = random_tensor({3, 3}, 19).set_requires_grad(true);
  Tape tape;
  TapeScope scope(&tape);
  Tensord y = sum(mul(matmul(x, x), sigmoid(x)));
  EXPECT_TRUE(tape.is_topologically_ordered());
  EXPECT_GT(tape.size(), 3u);
}

TEST(Backward, NoTapeRecordsNothing) {
  Tensord x = random_tensor({2, 2}, 20).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(&tape);
    TapeScope off(nullptr);
    (void)sum(mul(x, x));
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Backward, NonFiniteOutputIsRejected) {
  Tensord x(Shape{2}, {-1.0, 4.0});
  EXPECT_THROW(sqrt(x), NumericError);
}

TEST(FiniteDiff, SumGivesOnesAndSquareGivesSix) {
  auto f_sum = [](const Tensord& x) { return sum(x).item(); };
  const Tensord g_sum = finite_diff_grad<double>(f_sum, random_tensor({7}, 21), 1e-5);
  for (double g : g_sum.data()) EXPECT_NEAR(g, 1.0, 1e-9);
  auto f_sq = [](const Tensord& x) { return mul(x, x).item(); };
  EXPECT_NEAR(finite_diff_grad<double>(f_sq, Tensord::scalar(3.0), 1e-4).item(), 6.0, 1e-6);
}

TEST(FiniteDiff, AgreesWithAnalyticQuadraticForm) {
  // f(x) = x^T A x with symmetric A has gradient 2 A x.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensord b = random_tensor({5, 5}, 100 + seed);
    Tensord a = scale(add(b, transpose(b)), 0.5);
    Tensord x = random_tensor({5, 1}, 200 + seed);
    auto f = [&](const Tensord& v) { return matmul(transpose(v), matmul(a, v)).item(); };
    expect_near_all(finite_diff_grad<double>(f, x, 1e-5), scale(matmul(a, x), 2.0), 1e-8);
  }
}

TEST(GradCheck, EveryOpHasABackwardAndIsListedOnce) {
  const auto& ops = differentiable_ops();
  std::vector<std::string> sorted = ops;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_GE(ops.size(), 30u);
}

TEST(GradCheck, SuiteCoversEveryOpExactlyOnce) {
  std::vector<std::string> op_cases;
  std::set<std::string> all_names;
  for (const auto& c : gradcheck_cases()) {
    EXPECT_TRUE(all_names.insert(c.name).second) << "duplicate case " << c.name;
    if (c.group == "op") op_cases.push_back(c.name);
  }
  std::vector<std::string> ops = differentiable_ops();
  std::sort(ops.begin(), ops.end());
  std::sort(op_cases.begin(), op_cases.end());
  EXPECT_EQ(op_cases, ops);
}

TEST(GradCheck, InjectedBackwardFaultIsDetected) {
  LossBuilder<double> build = [](const std::vector<Tensord>& in) { return sum(mul(sigmoid(in[0]), in[0])); };
  std::vector<Tensord> inputs = {random_tensor({3, 3}, 22)};
  EXPECT_LT(check_gradients<double>(build, inputs, 1e-5).max_rel_error, 1e-7);
  set_backward_fault("sigmoid");
  const double corrupted = check_gradients<double>(build, inputs, 1e-5).max_rel_error;
  set_backward_fault("");
  EXPECT_GT(corrupted, 1e-2);
}

TEST(Memory, TracksLiveAndPeakBytes) {
  memory::reset_peak();
  const std::size_t base = memory::current_bytes();
  {
    Tensorf big(Shape{1000, 250});
    EXPECT_GE(memory::current_bytes(), base + 1000 * 250 * sizeof(float));
  }
  EXPECT_EQ(memory::current_bytes(), base);
  EXPECT_GE(memory::peak_bytes(), base + 1000 * 250 * sizeof(float));
}
