#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "snad/blur.hpp"

namespace snad {
namespace {

using testing::random_uniform;

// Replicate-padded correlation of one plane with the kernel, by brute force.
Tensor brute_blur(const Tensor& x, const BlurKernel& k) {
  const Shape& s = x.shape();
  const long r = static_cast<long>(k.size / 2);
  Tensor out(s);
  auto clampi = [](long v, long hi) { return std::max(0L, std::min(v, hi - 1)); };
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (long y = 0; y < static_cast<long>(s.h); ++y)
        for (long xx = 0; xx < static_cast<long>(s.w); ++xx) {
          double acc = 0.0;
          for (long ky = -r; ky <= r; ++ky)
            for (long kx = -r; kx <= r; ++kx) {
              const auto sy = static_cast<std::size_t>(clampi(y + ky, static_cast<long>(s.h)));
              const auto sx = static_cast<std::size_t>(clampi(xx + kx, static_cast<long>(s.w)));
              acc += k.at(static_cast<std::size_t>(ky + r), static_cast<std::size_t>(kx + r)) * x.at(n, c, sy, sx);
            }
          out.at(n, c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc;
        }
  return out;
}

TEST(LinearKernel, SizeThreeHorizontal) {
  const BlurKernel k = linear_kernel(3, 0.0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(k.at(r, c), r == 1 ? 1.0 / 3.0 : 0.0, 1e-12);
}

TEST(LinearKernel, FortyFiveDegreesOnAntiDiagonalBand) {
  const BlurKernel k = linear_kernel(25, 45.0);
  EXPECT_EQ(k.size, 25u);
  EXPECT_NEAR(k.sum(), 1.0, 1e-6);
  // y points down the rows, so +45 degrees runs bottom-left to top-right.
  double off_band = 0.0;
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t c = 0; c < 25; ++c) {
      const long d = static_cast<long>(r + c) - 24;
      if (std::abs(d) > 1) off_band += k.at(r, c);
    }
  EXPECT_EQ(off_band, 0.0);
  // A 25-sample line at 45 degrees reaches 12/sqrt(2) pixels along each axis.
  EXPECT_GT(k.at(12, 12), 0.0);
  EXPECT_GT(k.at(4, 20), 0.0);
  EXPECT_GT(k.at(20, 4), 0.0);
  EXPECT_EQ(k.at(0, 24), 0.0);
  for (std::size_t r = 0; r < 25; ++r)
    for (std::size_t c = 0; c < 25; ++c) EXPECT_NEAR(k.at(r, c), k.at(24 - r, 24 - c), 1e-15);
}

TEST(LinearKernel, SumsToOneForAnyAngle) {
  for (std::size_t size : {3u, 5u, 9u, 25u})
    for (double a = -180.0; a <= 180.0; a += 7.5) {
      const BlurKernel k = linear_kernel(size, a);
      EXPECT_NEAR(k.sum(), 1.0, 1e-6);
      for (double w : k.weights) EXPECT_GE(w, 0.0);
    }
}

TEST(LinearKernel, RejectsEvenAndTinySizes) {
  EXPECT_THROW(linear_kernel(4, 45.0), std::invalid_argument);
  EXPECT_THROW(linear_kernel(1, 45.0), std::invalid_argument);
}

TEST(TrajectoryKernel, DeterministicPerSeed) {
  EXPECT_EQ(trajectory_kernel(7).weights, trajectory_kernel(7).weights);
  EXPECT_NE(trajectory_kernel(7).weights, trajectory_kernel(8).weights);
}

TEST(TrajectoryKernel, ThousandSeedsSatisfyContract) {
  std::size_t seen_small = 0, seen_large = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const BlurKernel k = trajectory_kernel(seed);
    ASSERT_EQ(k.size % 2, 1u);
    ASSERT_GE(k.size, 13u);
    ASSERT_LE(k.size, 29u);
    ASSERT_NEAR(k.sum(), 1.0, 1e-6);
    for (double w : k.weights) ASSERT_GE(w, 0.0);
    seen_small += k.size == 13;
    seen_large += k.size == 29;
  }
  EXPECT_GT(seen_small, 0u);
  EXPECT_GT(seen_large, 0u);
}

TEST(Trajectory, PointsFinite) {
  const auto pts = random_trajectory(3, 21, TrajectoryParams{});
  ASSERT_GE(pts.size(), 2u);
  for (const Point2& p : pts) {
    EXPECT_TRUE(std::isfinite(p.x));
    EXPECT_TRUE(std::isfinite(p.y));
  }
}

TEST(ApplyBlur, IdentityKernelWithoutNoise) {
  std::mt19937_64 rng(1);
  const Tensor x = random_uniform(Shape{1, 3, 9, 9}, rng, 0, 1);
  EXPECT_EQ(apply_blur(x, identity_kernel(), 0.0, 0), x);
}

TEST(ApplyBlur, ConstantImageUnchanged) {
  const Tensor x(Shape{1, 3, 16, 16}, 0.37);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Tensor y = apply_blur(x, trajectory_kernel(seed), 0.0, 0);
    EXPECT_LT(max_abs_diff(x, y), 1e-12);
  }
  EXPECT_LT(max_abs_diff(x, apply_blur(x, linear_kernel(25, 45.0), 0.0, 0)), 1e-12);
}

TEST(ApplyBlur, MatchesReplicatePaddedOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = random_uniform(Shape{2, 3, 11, 13}, rng, 0, 1);
  for (const BlurKernel& k : {linear_kernel(5, 30.0), trajectory_kernel(4)}) {
    const Tensor got = apply_blur(x, k, 0.0, 0);
    EXPECT_LT(max_abs_diff(got, brute_blur(x, k)), 1e-12);
  }
}

TEST(ApplyBlur, NoiseIsSeeded) {
  std::mt19937_64 rng(3);
  const Tensor x = random_uniform(Shape{1, 3, 8, 8}, rng, 0.2, 0.8);
  const BlurKernel k = linear_kernel(5, 45.0);
  EXPECT_EQ(apply_blur(x, k, 0.03, 11), apply_blur(x, k, 0.03, 11));
  EXPECT_NE(apply_blur(x, k, 0.03, 11), apply_blur(x, k, 0.03, 12));
}

TEST(ApplyBlur, OutputClampedAndNegativeSigmaRejected) {
  const Tensor x(Shape{1, 1, 8, 8}, 0.99);
  const Tensor y = apply_blur(x, identity_kernel(), 0.5, 3);
  for (double v : y.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(apply_blur(x, identity_kernel(), -0.1, 0), std::invalid_argument);
}

TEST(ApplyBlur, MeanPreservedOnLargeRandomImages) {
  std::mt19937_64 rng(4);
  const Tensor x = random_uniform(Shape{1, 1, 64, 64}, rng, 0, 1);
  const Tensor y = apply_blur(x, linear_kernel(9, 45.0), 0.0, 0);
  EXPECT_NEAR(x.sum() / 4096.0, y.sum() / 4096.0, 1e-3);
}

TEST(ApplyBlur, TotalVariationContracts) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_uniform(Shape{1, 3, 16, 16}, rng, 0, 1);
    const BlurKernel k = trial % 2 ? trajectory_kernel(static_cast<std::uint64_t>(trial)) : linear_kernel(7, 10.0 * trial);
    EXPECT_LE(total_variation(apply_blur(x, k, 0.0, 0)), total_variation(x) + 1e-9) << trial;
  }
}

TEST(KernelDump, ScaledToMax) {
  const BlurKernel k = linear_kernel(3, 0.0);
  const auto gray = kernel_to_gray(k);
  ASSERT_EQ(gray.size(), 9u);
  EXPECT_EQ(gray[4], 255);
  EXPECT_EQ(gray[0], 0);
}

}  // namespace
}  // namespace snad
