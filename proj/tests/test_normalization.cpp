#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "snad/gradcheck.hpp"
#include "snad/normalization.hpp"
#include "snad/suites.hpp"

namespace snad {
namespace {

using testing::plane_moments;
using testing::random_uniform;

Tensor run_sn(const Tensor& x, const RegionMasks& m, SnStats* stats = nullptr) {
  Tape tape;
  return sn_forward(tape.constant(x), m, kNormEps, stats).value();
}

RegionMasks masks_for(std::mt19937_64& rng, std::size_t n, std::size_t h, std::size_t w) {
  return split_foreground(random_labels(rng, n, h, w));
}

TEST(SeparableNorm, ConstantRegionsGoToZero) {
  LabelMap map(4, 4);
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t y = 0; y < 4; ++y) map.at(x, y) = Region::kSkin;
  const RegionMasks m = split_foreground(map);
  Tensor x(Shape{1, 2, 4, 4});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 16; ++i) x.plane(0, c)[i] = m.foreground[i] != 0.0 ? 5.0 : 2.0;
  const Tensor y = run_sn(x, m);
  for (double v : y.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(SeparableNorm, RegionsStandardizedAgainstOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const RegionMasks m = masks_for(rng, 2, 8, 8);
    const Tensor x = random_uniform(Shape{2, 3, 8, 8}, rng, -3, 5);
    const Tensor y = run_sn(x, m);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (const Tensor* mask : {&m.foreground, &m.background}) {
          const auto before = plane_moments(x, n, c, *mask);
          if (before.count < 2) continue;
          const auto after = plane_moments(y, n, c, *mask);
          EXPECT_LT(std::abs(after.mean), 1e-10);
          // Biased variance with eps inside the root: var / (var + eps).
          EXPECT_NEAR(after.var, before.var / (before.var + kNormEps), 1e-12);
          EXPECT_NEAR(after.var, 1.0, 1e-3);
        }
  }
}

TEST(SeparableNorm, StatsMatchMaskedReduction) {
  std::mt19937_64 rng(2);
  const RegionMasks m = masks_for(rng, 2, 6, 5);
  const Tensor x = random_uniform(Shape{2, 3, 6, 5}, rng);
  SnStats st;
  (void)run_sn(x, m, &st);
  const MaskedMoments fg = reduce_masked_mean_var(x, m.foreground);
  const MaskedMoments bg = reduce_masked_mean_var(x, m.background);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(st.mean_fg[k], fg.mean[k], 1e-12);
    EXPECT_NEAR(st.var_fg[k], fg.var[k], 1e-12);
    EXPECT_NEAR(st.mean_bg[k], bg.mean[k], 1e-12);
    EXPECT_NEAR(st.var_bg[k], bg.var[k], 1e-12);
  }
  for (std::size_t b = 0; b < 2; ++b) EXPECT_EQ(st.count_fg[b] + st.count_bg[b], 30u);
}

TEST(SeparableNorm, EmptyRegionGetsSentinel) {
  const RegionMasks m = split_foreground(LabelMap(4, 4));  // all back
  std::mt19937_64 rng(3);
  const Tensor x = random_uniform(Shape{1, 2, 4, 4}, rng);
  SnStats st;
  const Tensor y = run_sn(x, m, &st);
  EXPECT_TRUE(st.fg_empty(0));
  EXPECT_EQ(st.mean_fg[0], 0.0);
  EXPECT_EQ(st.var_fg[0], 1.0);
  EXPECT_TRUE(y.all_finite());
}

TEST(SeparableNorm, RejectsMaskShapeMismatch) {
  std::mt19937_64 rng(4);
  const RegionMasks m = masks_for(rng, 1, 8, 8);
  EXPECT_THROW(run_sn(Tensor(Shape{1, 2, 4, 4}), m), ShapeError);
  Tape tape;
  EXPECT_THROW(sn_forward(tape.constant(Tensor(Shape{1, 1, 8, 8})), m, 0.0), std::invalid_argument);
}

TEST(SeparableNorm, WholeSliceComposesToStandardNormal) {
  std::mt19937_64 rng(5);
  const std::vector<LabelMap> labels = random_half_labels(rng, 1, 16, 16);
  const RegionMasks m = split_foreground(labels);
  const Tensor x = random_uniform(Shape{1, 2, 16, 16}, rng, -2, 7);
  const Tensor y = run_sn(x, m);
  for (std::size_t c = 0; c < 2; ++c) {
    const std::span<const double> slice(y.plane(0, c), 256);
    const DecompositionResidual r = decomposition_oracle(slice, m.foreground.data());
    EXPECT_LT(std::abs(r.mean), 1e-10);
    EXPECT_NEAR(r.var, 1.0, 1e-3);
    EXPECT_LT(r.mean_residual, 1e-9);
    EXPECT_LT(r.var_residual, 1e-9);
  }
}

TEST(SeparableNorm, SquaredReadingDoesNotStandardize) {
  std::mt19937_64 rng(6);
  const RegionMasks m = masks_for(rng, 1, 8, 8);
  const Tensor y = sn_forward_squared_variant(random_uniform(Shape{1, 1, 8, 8}, rng), m);
  EXPECT_GT(std::abs(plane_moments(y, 0, 0, m.foreground).mean), 0.1);
}

TEST(BaselineNorms, ConstantThroughInstanceNormIsZero) {
  Tape tape;
  const Tensor y = instance_norm(tape.constant(Tensor(Shape{2, 3, 4, 4}, 3.5))).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BaselineNorms, BatchNormOfTwoConstantImagesKeepsBias) {
  // Image 0 constant a, image 1 constant b: BN leaves -+(a-b)/|a-b| scaled
  // by |a-b|/sqrt((a-b)^2 + 4 eps) in each image; IN leaves zero.
  const double a = 1.0, b = 4.0;
  Tensor x(Shape{2, 1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) {
    x[i] = a;
    x[9 + i] = b;
  }
  Tape tape;
  const Tensor bn = batch_norm(tape.constant(x)).value();
  const Tensor in = instance_norm(tape.constant(x)).value();
  const double half = (b - a) / 2.0, expected = half / std::sqrt(half * half + kNormEps);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(bn[i], -expected, 1e-12);
    EXPECT_NEAR(bn[9 + i], expected, 1e-12);
    EXPECT_EQ(in[i], 0.0);
  }
  const RegionMasks both = split_foreground(std::vector<LabelMap>{LabelMap(3, 3, Region::kSkin), LabelMap(3, 3, Region::kSkin)});
  EXPECT_GT(region_bias(bn, both), 0.99);
  EXPECT_LT(region_bias(run_sn(x, both), both), 1e-12);
}

TEST(BaselineNorms, BiasOrderingOnTwoRegionBatches) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const RegionMasks m = split_foreground(random_half_labels(rng, 3, 8, 8));
    const Tensor x = two_region_batch(rng, m, 4, 1.0);
    Tape tape;
    const double sn = region_bias(sn_forward(tape.constant(x), m).value(), m);
    const double in = region_bias(instance_norm(tape.constant(x)).value(), m);
    const double bn = region_bias(batch_norm(tape.constant(x)).value(), m);
    EXPECT_LT(sn, 1e-8);
    EXPECT_LT(sn, in);
    EXPECT_LE(in, bn);
  }
}

TEST(BaselineNorms, ParseKinds) {
  EXPECT_EQ(parse_norm_kind("sn"), NormKind::kSeparable);
  EXPECT_EQ(parse_norm_kind("in"), NormKind::kInstance);
  EXPECT_EQ(parse_norm_kind("bn"), NormKind::kBatch);
  EXPECT_THROW(parse_norm_kind("gn"), std::invalid_argument);
  EXPECT_STREQ(norm_kind_name(NormKind::kBatch), "bn");
}

TEST(Decomposition, ResidualsAndDirectStats) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(256), mask(256);
    std::uniform_real_distribution<double> d(-10, 10);
    for (auto& e : v) e = d(rng);
    for (auto& e : mask) e = coin(rng) ? 1.0 : 0.0;
    mask[0] = 1.0;
    mask[1] = 0.0;
    const DecompositionResidual r = decomposition_oracle(v, mask);
    EXPECT_LT(r.mean_residual, 1e-9);
    EXPECT_LT(r.var_residual, 1e-9);
    double mu = 0.0;
    for (double e : v) mu += e;
    mu /= 256.0;
    EXPECT_NEAR(r.mean, mu, 1e-12);
    EXPECT_EQ(r.n_fg + r.n_bg, 256u);
  }
}

TEST(Decomposition, EqualRegionStatisticsHaveNoCrossTerm) {
  const std::vector<double> v = {1, 2, 3, 1, 2, 3};
  const std::vector<double> mask = {1, 1, 1, 0, 0, 0};
  const DecompositionResidual r = decomposition_oracle(v, mask);
  EXPECT_DOUBLE_EQ(r.mean_fg, r.mean_bg);
  EXPECT_NEAR(r.var, r.var_fg, 1e-15);
}

TEST(Decomposition, RejectsEmptyRegion) {
  const std::vector<double> v = {1, 2, 3};
  EXPECT_THROW(decomposition_oracle(v, std::vector<double>{1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(decomposition_oracle(v, std::vector<double>{0, 0, 0}), std::invalid_argument);
}

struct AdFixture {
  ParameterSet params;
  InitRng init{11};
  AdParams ad;
  RegionMasks masks;
  Tensor x;

  explicit AdFixture(std::size_t channels, std::size_t size = 4) {
    std::mt19937_64 rng(12);
    ad = AdParams::create(params, "ad", channels, init, 6);
    masks = split_foreground(random_labels(rng, 1, size, size));
    x = random_uniform(Shape{1, channels, size, size}, rng);
  }
};

TEST(AdaptiveDenorm, FreshLayerIsIdentity) {
  AdFixture f(3);
  Tape tape;
  Var xn = tape.constant(f.x);
  const Tensor y = ad_forward(xn, f.masks.onehot(), f.ad).value();
  EXPECT_EQ(y, f.x);
}

TEST(AdaptiveDenorm, ZeroScaleLeavesOnlyShift) {
  AdFixture f(2);
  // 1 + gamma == 0 everywhere; beta a known constant.
  for (double& v : f.ad.gamma.bias->value.data()) v = -1.0;
  for (double& v : f.ad.beta.bias->value.data()) v = 0.25;
  Tape tape;
  const Tensor y = ad_forward(tape.constant(f.x), f.masks.onehot(), f.ad).value();
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(AdaptiveDenorm, RejectsResolutionMismatch) {
  AdFixture f(2);
  Tape tape;
  EXPECT_THROW(ad_forward(tape.constant(Tensor(Shape{1, 2, 8, 8})), f.masks.onehot(), f.ad), ShapeError);
}

TEST(AdaptiveDenorm, ParameterGradients) {
  AdFixture f(2);
  std::mt19937_64 rng(13);
  for (std::size_t i = 0; i < f.params.size(); ++i)
    for (double& v : f.params[i].value.data()) v = std::normal_distribution<double>(0, 0.3)(rng);
  const Tensor probe = random_uniform(f.x.shape(), rng);
  auto loss = [&](Tape& t) {
    return sum(mul_mask(ad_forward(t.constant(f.x), f.masks.onehot(), f.ad), probe));
  };
  for (std::size_t i = 0; i < f.params.size(); ++i)
    EXPECT_LT(check_parameter_gradient(loss, f.params[i]).max_rel_error, 1e-4) << f.params[i].name;
}

TEST(SnadLayer, FreshLayerEqualsSeparableNorm) {
  AdFixture f(3);
  Tape tape;
  const Tensor y = snad_layer(tape.constant(f.x), f.masks, f.masks.onehot(), f.ad).value();
  EXPECT_EQ(y, run_sn(f.x, f.masks));
}

TEST(SnadLayer, ChainsAndMatchesFiniteDifferences) {
  AdFixture f(2);
  std::mt19937_64 rng(14);
  for (std::size_t i = 0; i < f.params.size(); ++i)
    for (double& v : f.params[i].value.data()) v = std::normal_distribution<double>(0, 0.3)(rng);
  Tape tape;
  Var once = snad_layer(tape.constant(f.x), f.masks, f.masks.onehot(), f.ad);
  Var twice = snad_layer(once, f.masks, f.masks.onehot(), f.ad);
  EXPECT_EQ(twice.shape(), f.x.shape());
  EXPECT_TRUE(twice.value().all_finite());

  const Tensor probe = random_uniform(f.x.shape(), rng);
  const GradCheckResult r = check_gradient(
      [&](Tape&, const Var& v) { return sum(mul_mask(snad_layer(v, f.masks, f.masks.onehot(), f.ad), probe)); }, f.x);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(SnadBlock, DoublesResolution) {
  ParameterSet params;
  InitRng init(15);
  const SnadBlockParams p = SnadBlockParams::create(params, "blk", 8, 5, init, 4);
  std::mt19937_64 rng(16);
  const RegionMasks m = split_foreground(random_labels(rng, 1, 4, 4));
  Tape tape;
  const Var y = snad_block(tape.constant(random_uniform(Shape{1, 8, 4, 4}, rng)), m, m.onehot(), p);
  EXPECT_EQ(y.shape(), (Shape{1, 5, 8, 8}));
  EXPECT_THROW(snad_block(tape.constant(Tensor(Shape{1, 7, 4, 4})), m, m.onehot(), p), ShapeError);
}

TEST(SnadBlock, ZeroInputWithZeroBiasesGivesZero) {
  ParameterSet params;
  InitRng init(17);
  const SnadBlockParams p = SnadBlockParams::create(params, "blk", 4, 4, init, 4);
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].role == "bias") for (double& v : params[i].value.data()) v = 0.0;
  std::mt19937_64 rng(18);
  const RegionMasks m = split_foreground(random_labels(rng, 1, 4, 4));
  Tape tape;
  const Tensor y = snad_block(tape.constant(Tensor(Shape{1, 4, 4, 4})), m, m.onehot(), p).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Suites, NormAndDecompositionPass) {
  for (const auto& r : norm_suite(0)) EXPECT_TRUE(r.passed) << r.name << " " << r.value;
  for (const auto& r : decomp_suite(0, 200)) EXPECT_TRUE(r.passed) << r.name << " " << r.value;
}

}  // namespace
}  // namespace snad
