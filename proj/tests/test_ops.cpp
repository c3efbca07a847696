#include <gtest/gtest.h>

#include <algorithm>

#include "gunet/ops.hpp"
#include "oracles.hpp"

using gunet::Rng;
using gunet::Shape;
using gunet::Tensor;

namespace {

std::vector<double> random_bias(std::size_t n, Rng& rng) {
  std::vector<double> b(n);
  for (double& v : b) v = rng.uniform(-1, 1);
  return b;
}

}  // namespace

TEST(Conv2d, IdentityKernelReproducesInput) {
  Rng rng(1);
  Tensor x = oracle::random_tensor({2, 1, 7, 5}, rng);
  Tensor k(1, 1, 3, 3);
  k.at(0, 0, 1, 1) = 1.0;
  Tensor y = gunet::conv2d(x, k, {}, 1, 1);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(gunet::max_abs_diff(x, y), 0.0);
}

TEST(Conv2d, PointwiseKernelScales) {
  Rng rng(2);
  Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
  Tensor k(1, 1, 1, 1, 2.0);
  std::vector<double> bias{0.0};
  Tensor y = gunet::conv2d(x, k, bias, 1, 0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 2.0 * x[i]);
}

TEST(Conv2d, MatchesNaiveLoops) {
  Rng rng(3);
  Tensor x = oracle::random_tensor({1, 2, 5, 5}, rng);
  Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
  auto b = random_bias(3, rng);
  EXPECT_LE(gunet::max_abs_diff(gunet::conv2d(x, w, b, 1, 1), oracle::conv2d(x, w, b, 1, 1)), 1e-12);
  EXPECT_LE(gunet::max_abs_diff(gunet::conv2d(x, w, b, 2, 1), oracle::conv2d(x, w, b, 2, 1)), 1e-12);
}

TEST(Conv2d, ShapeMismatchNamesDimensions) {
  Tensor x(1, 2, 5, 5);
  Tensor w(3, 4, 3, 3);
  try {
    gunet::conv2d(x, w, {}, 1, 1);
    FAIL() << "expected DataError";
  } catch (const gunet::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("c_in = 4"), std::string::npos);
  }
  std::vector<double> bad_bias(2);
  EXPECT_THROW(gunet::conv2d(x, Tensor(3, 2, 3, 3), bad_bias, 1, 1), gunet::DataError);
}

TEST(Conv2d, FuzzAgainstOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t k = 1 + rng.below(4), stride = 1 + rng.below(2), pad = rng.below(k);
    const std::size_t h = k + rng.below(6), w = k + rng.below(6);
    Tensor x = oracle::random_tensor({1 + rng.below(2), 1 + rng.below(3), h, w}, rng);
    Tensor wt = oracle::random_tensor({1 + rng.below(3), x.c(), k, k}, rng);
    auto b = random_bias(wt.n(), rng);
    ASSERT_LE(gunet::max_abs_diff(gunet::conv2d(x, wt, b, stride, pad),
                                  oracle::conv2d(x, wt, b, int(stride), int(pad))),
              1e-10)
        << "trial " << trial;
  }
}

TEST(TransposedConv2d, SinglePixelStampIsCroppedKernel) {
  Tensor x(1, 1, 1, 1, 1.5);
  Tensor w(1, 1, 4, 4, 1.0);
  Tensor y = gunet::transposed_conv2d(x, w, {}, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.storage()) EXPECT_DOUBLE_EQ(v, 1.5);
  EXPECT_EQ(gunet::max_abs_diff(y, oracle::transposed_conv2d(x, w, {}, 2, 1)), 0.0);
}

TEST(TransposedConv2d, OddKernelStride2ProducesCheckerboard) {
  Tensor x(1, 1, 6, 6, 1.0);
  Tensor w(1, 1, 3, 3, 1.0);
  Tensor y = gunet::transposed_conv2d(x, w, {}, 2, 0);
  EXPECT_EQ(gunet::max_abs_diff(y, oracle::transposed_conv2d(x, w, {}, 2, 0)), 0.0);
  // Interior coverage alternates 4 / 2 / 1 depending on parity.
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 3), 2.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 3, 3), 1.0);
}

TEST(TransposedConv2d, EvenKernelStride2ConstantInterior) {
  Tensor x(1, 1, 6, 6, 1.0);
  Tensor w(1, 1, 4, 4, 1.0);
  Tensor y = gunet::transposed_conv2d(x, w, {}, 2, 1);
  ASSERT_EQ(y.h(), 12u);
  for (std::size_t i = 1; i + 1 < y.h(); ++i)
    for (std::size_t j = 1; j + 1 < y.w(); ++j) EXPECT_DOUBLE_EQ(y.at(0, 0, i, j), 4.0);
}

TEST(TransposedConv2d, FuzzAgainstStampOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t k = 1 + rng.below(4), stride = 1 + rng.below(2);
    const std::size_t pad = rng.below((k + 1) / 2);
    Tensor x = oracle::random_tensor({1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(5), 1 + rng.below(5)}, rng);
    Tensor w = oracle::random_tensor({x.c(), 1 + rng.below(3), k, k}, rng);
    auto b = random_bias(w.c(), rng);
    ASSERT_LE(gunet::max_abs_diff(gunet::transposed_conv2d(x, w, b, stride, pad),
                                  oracle::transposed_conv2d(x, w, b, int(stride), int(pad))),
              1e-10)
        << "trial " << trial;
  }
}

TEST(BoxMean, ConstantAndRadiusZero) {
  Tensor c(1, 2, 5, 7, 0.25);
  EXPECT_LE(gunet::max_abs_diff(gunet::box_mean(c, 2), c), 1e-15);
  Rng rng(6);
  Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
  EXPECT_EQ(gunet::max_abs_diff(gunet::box_mean(x, 0), x), 0.0);
}

TEST(BoxMean, MatchesNaiveWindows) {
  Rng rng(7);
  Tensor x = oracle::random_tensor({1, 1, 6, 6}, rng);
  EXPECT_LE(gunet::max_abs_diff(gunet::box_mean(x, 1), oracle::box_mean(x, 1)), 1e-12);
}

TEST(BoxMean, LargeRadiusIsGlobalMean) {
  Rng rng(8);
  Tensor x = oracle::random_tensor({1, 1, 5, 3}, rng);
  Tensor y = gunet::box_mean(x, 50);
  const double m = x.sum() / 15.0;
  for (double v : y.storage()) EXPECT_NEAR(v, m, 1e-14);
}

TEST(BoxMean, FuzzWithinRangeAndMatchesOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 120; ++trial) {
    Tensor x = oracle::random_tensor({1, 1 + rng.below(2), 1 + rng.below(9), 1 + rng.below(9)}, rng);
    const std::size_t r = rng.below(5);
    Tensor y = gunet::box_mean(x, r);
    ASSERT_LE(gunet::max_abs_diff(y, oracle::box_mean(x, int(r))), 1e-10);
    for (std::size_t c = 0; c < x.c(); ++c) {
      auto src = x.plane(0, c);
      const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
      for (double v : y.plane(0, c)) {
        ASSERT_GE(v, *lo - 1e-12);
        ASSERT_LE(v, *hi + 1e-12);
      }
    }
  }
}

TEST(ResizeNearest, BlockReplication) {
  Tensor v(1, 1, 1, 1, 3.0);
  Tensor up = gunet::resize_nearest(v);
  ASSERT_EQ(up.shape(), (Shape{1, 1, 2, 2}));
  for (double e : up.storage()) EXPECT_EQ(e, 3.0);

  Tensor q(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor r = gunet::resize_nearest(q);
  const double expected[4][4] = {{1, 1, 2, 2}, {1, 1, 2, 2}, {3, 3, 4, 4}, {3, 3, 4, 4}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(r.at(0, 0, i, j), expected[i][j]);
  EXPECT_EQ(gunet::max_abs_diff(gunet::box_mean(r, 0), r), 0.0);
}

TEST(ResizeNearest, EvenSubsampleRecoversInput) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = oracle::random_tensor({1, 2, 1 + rng.below(6), 1 + rng.below(6)}, rng);
    Tensor up = gunet::resize_nearest(x);
    for (std::size_t c = 0; c < x.c(); ++c)
      for (std::size_t i = 0; i < x.h(); ++i)
        for (std::size_t j = 0; j < x.w(); ++j) ASSERT_EQ(up.at(0, c, 2 * i, 2 * j), x.at(0, c, i, j));
  }
}

TEST(ResizeBilinear, ConstantStaysConstant) {
  Tensor c(1, 1, 3, 5, 0.7);
  Tensor u = gunet::resize_bilinear(c, 8, 11);
  for (double v : u.storage()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(ResizeBilinear, HalfPixelConvention) {
  Tensor x(Shape{1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  Tensor u = gunet::resize_bilinear(x, 1, 4);
  const double expected[] = {0.0, 0.25, 0.75, 1.0};
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(u.at(0, 0, 0, j), expected[j]);
}

TEST(ResizeBilinear, RampRoundTripWithinStep) {
  Tensor ramp(1, 1, 4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ramp.at(0, 0, i, j) = 0.1 * (i * 4 + j);
  Tensor back = gunet::resize_bilinear(gunet::resize_bilinear(ramp, 2, 2), 4, 4);
  EXPECT_LE(gunet::max_abs_diff(back, ramp), 0.1 * 4 + 1e-12);  // one row step of the ramp
}

TEST(ResizeBilinear, ZeroTargetRejected) {
  EXPECT_THROW(gunet::resize_bilinear(Tensor(1, 1, 2, 2), 0, 4), gunet::DataError);
}

TEST(Adjoints, InnerProductIdentity) {
  // <A x, g> == <x, A^T g> for every linear primitive and its adjoint.
  Rng rng(11);
  auto dot = [](const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = oracle::random_tensor({1, 2, 4 + rng.below(4), 4 + rng.below(4)}, rng);
    const std::size_t r = rng.below(3);
    Tensor g = oracle::random_tensor(x.shape(), rng);
    EXPECT_NEAR(dot(gunet::box_mean(x, r), g), dot(x, gunet::box_mean_adjoint(g, r)), 1e-12);

    Tensor gn = oracle::random_tensor({1, 2, x.h() * 2, x.w() * 2}, rng);
    EXPECT_NEAR(dot(gunet::resize_nearest(x), gn), dot(x, gunet::resize_nearest_adjoint(gn)), 1e-12);
    EXPECT_NEAR(dot(gunet::resize_bilinear(x, gn.h(), gn.w()), gn),
                dot(x, gunet::resize_bilinear_adjoint(gn, x.h(), x.w())), 1e-12);
  }
}
