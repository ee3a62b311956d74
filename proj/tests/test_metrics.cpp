#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "snad/metrics.hpp"

namespace snad {
namespace {

using testing::random_uniform;

// Direct per-window SSIM with a normalized Gaussian window.
double ssim_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t k = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> g(k * k);
  double gs = 0.0;
  for (std::size_t y = 0; y < k; ++y)
    for (std::size_t x = 0; x < k; ++x) {
      const double dy = static_cast<double>(y) - 5.0, dx = static_cast<double>(x) - 5.0;
      g[y * k + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      gs += g[y * k + x];
    }
  for (double& v : g) v /= gs;
  const Shape& s = a.shape();
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y0 = 0; y0 + k <= s.h; ++y0)
        for (std::size_t x0 = 0; x0 + k <= s.w; ++x0) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (std::size_t y = 0; y < k; ++y)
            for (std::size_t x = 0; x < k; ++x) {
              const double w = g[y * k + x], va = a.at(n, c, y0 + y, x0 + x), vb = b.at(n, c, y0 + y, x0 + x);
              ma += w * va;
              mb += w * vb;
              saa += w * va * va;
              sbb += w * vb * vb;
              sab += w * va * vb;
            }
          const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
          total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
          ++windows;
        }
  return total / static_cast<double>(windows);
}

TEST(Psnr, SixteenLevelOffset) {
  const Tensor a(Shape{1, 3, 8, 8}, 0.25);
  Tensor b = a;
  for (double& v : b.data()) v += 16.0 / 255.0;
  EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(255.0 / 16.0), 1e-9);
  EXPECT_NEAR(psnr(a, b), 24.0486, 1e-3);
}

TEST(Psnr, IdenticalIsInfiniteAndCappedForText) {
  std::mt19937_64 rng(1);
  const Tensor a = random_uniform(Shape{1, 3, 8, 8}, rng, 0, 1);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  EXPECT_EQ(psnr_for_text(psnr(a, a)), 99.0);
  EXPECT_EQ(psnr_for_text(150.0), 99.0);
  EXPECT_EQ(psnr_for_text(31.5), 31.5);
}

TEST(Psnr, MatchesDirectFormula) {
  std::mt19937_64 rng(2);
  const Tensor a = random_uniform(Shape{2, 3, 9, 7}, rng, 0, 1), b = random_uniform(a.shape(), rng, 0, 1);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.numel());
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / mse), 1e-10);
  EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
}

TEST(Ssim, SelfSimilarityIsOne) {
  std::mt19937_64 rng(3);
  const Tensor a = random_uniform(Shape{1, 3, 16, 16}, rng, 0, 1);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, MatchesWindowOracleAndIsSymmetric) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 5; ++t) {
    const Tensor a = random_uniform(Shape{1, 2, 14, 17}, rng, 0, 1);
    const Tensor b = random_uniform(a.shape(), rng, 0, 1);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-10);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-14);
  }
}

TEST(Ssim, InvertedCheckerboardScoresLow) {
  Tensor a(Shape{1, 1, 16, 16});
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) a.at(0, 0, y, x) = (x + y) % 2 ? 1.0 : 0.0;
  Tensor b = a;
  for (double& v : b.data()) v = 1.0 - v;
  EXPECT_LT(ssim(a, b), 0.5);
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
  EXPECT_THROW(ssim(Tensor(Shape{1, 1, 10, 32}), Tensor(Shape{1, 1, 10, 32})), ShapeError);
  EXPECT_NO_THROW(ssim(Tensor(Shape{1, 1, 11, 11}), Tensor(Shape{1, 1, 11, 11})));
}

TEST(L1Percent, UniformDifference) {
  const Tensor a(Shape{1, 3, 4, 4}, 0.3), b(Shape{1, 3, 4, 4}, 0.4);
  EXPECT_NEAR(l1_percent(a, b), 10.0, 1e-12);
  EXPECT_EQ(l1_percent(a, a), 0.0);
}

TEST(MetricCsv, HeaderAndCappedRows) {
  std::mt19937_64 rng(5);
  const Tensor a = random_uniform(Shape{1, 3, 12, 12}, rng, 0, 1);
  std::ostringstream os;
  write_metric_csv(os, {compare_images("0000", a, a)});
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "pair_id,psnr_db,ssim,l1_pct");
  EXPECT_NE(text.find("0000,99,1,0"), std::string::npos) << text;
}

}  // namespace
}  // namespace snad
