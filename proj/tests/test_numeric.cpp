#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "snad/autodiff.hpp"
#include "snad/gradcheck.hpp"
#include "snad/normalization.hpp"
#include "snad/tensor.hpp"

namespace snad {
namespace {

using testing::naive_conv;
using testing::naive_conv_transpose;
using testing::random_uniform;

Tensor conv(const Tensor& x, const Tensor& w, const Tensor* b, const ConvSpec& spec) {
  Tape tape;
  Var bias = b ? tape.constant(*b) : Var{};
  return conv2d(tape.constant(x), tape.constant(w), bias, spec).value();
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(1);
  const Tensor w = random_uniform(Shape{1, 1, 3, 3}, rng);
  const Tensor y = conv(Tensor(Shape{1, 1, 3, 3}), w, nullptr, ConvSpec::same(1, 1));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, ImpulseResponseIsFlippedKernel) {
  // Cross-correlation: a centered impulse returns the kernel rotated by 180 degrees.
  Tensor x(Shape{1, 1, 3, 3});
  x.at(0, 0, 1, 1) = 1.0;
  Tensor w(Shape{1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor y = conv(x, w, nullptr, ConvSpec::same(1, 1));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(y.at(0, 0, r, c), w.at(0, 0, 2 - r, 2 - c));
}

TEST(Conv2d, MatchesDirectLoop) {
  std::mt19937_64 rng(2);
  struct Case {
    ConvSpec spec;
    std::size_t h, w;
  };
  const Case cases[] = {{ConvSpec::same(3, 5), 7, 6},
                        {ConvSpec::down(4, 2), 8, 8},
                        {ConvSpec{3, 2, 4, 4, 2, 1, false}, 8, 8},
                        {ConvSpec{2, 3, 5, 5, 1, 2, false}, 5, 9},
                        {ConvSpec{1, 2, 1, 1, 1, 0, false}, 3, 3}};
  for (const Case& c : cases) {
    const Tensor x = random_uniform(Shape{2, c.spec.in_channels, c.h, c.w}, rng);
    const Tensor w = random_uniform(c.spec.weight_shape(), rng);
    const Tensor b = random_uniform(Shape{c.spec.out_channels, 1, 1, 1}, rng);
    const Tensor got = conv(x, w, &b, c.spec);
    const Tensor want = naive_conv(x, w, &b, c.spec.stride, c.spec.padding);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(max_abs_diff(got, want), 1e-12);
  }
}

TEST(Conv2d, OutputExtentFormula) {
  const ConvSpec s{1, 1, 3, 3, 2, 1, false};
  const Tensor y = conv(Tensor(Shape{1, 1, 9, 7}), Tensor(Shape{1, 1, 3, 3}), nullptr, s);
  EXPECT_EQ(y.shape().h, (9 + 2 - 3) / 2 + 1);
  EXPECT_EQ(y.shape().w, (7 + 2 - 3) / 2 + 1);
}

TEST(Conv2d, Linearity) {
  std::mt19937_64 rng(3);
  const ConvSpec spec = ConvSpec::same(2, 3);
  const Tensor x = random_uniform(Shape{1, 2, 5, 5}, rng), z = random_uniform(Shape{1, 2, 5, 5}, rng);
  const Tensor w = random_uniform(spec.weight_shape(), rng);
  const double a = 0.7, b = -1.3;
  const Tensor lhs = conv(x * a + z * b, w, nullptr, spec);
  const Tensor rhs = conv(x, w, nullptr, spec) * a + conv(z, w, nullptr, spec) * b;
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Conv2d, DepthwiseActsPerChannel) {
  std::mt19937_64 rng(4);
  const ConvSpec spec{3, 3, 3, 3, 1, 1, true};
  const Tensor x = random_uniform(Shape{1, 3, 4, 4}, rng);
  const Tensor w = random_uniform(spec.weight_shape(), rng);
  const Tensor y = conv(x, w, nullptr, spec);
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor xc(Shape{1, 1, 4, 4}), wc(Shape{1, 1, 3, 3});
    std::copy(x.plane(0, c), x.plane(0, c) + 16, xc.data().begin());
    std::copy(w.plane(c, 0), w.plane(c, 0) + 9, wc.data().begin());
    const Tensor want = naive_conv(xc, wc, nullptr, 1, 1);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y.plane(0, c)[i], want[i], 1e-12);
  }
}

TEST(Conv2d, RejectsMismatchedChannels) {
  Tape tape;
  const ConvSpec spec = ConvSpec::same(3, 2);
  Var x = tape.constant(Tensor(Shape{1, 4, 5, 5}));
  Var w = tape.constant(Tensor(spec.weight_shape()));
  try {
    (void)conv2d(x, w, Var{}, spec);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
}

TEST(ConvSpec, EvenSameKernelRejected) {
  EXPECT_THROW(ConvSpec::same(1, 1, 4).validate(), std::invalid_argument);
  EXPECT_NO_THROW((ConvSpec{1, 1, 4, 4, 2, 1, false}).validate());
  EXPECT_THROW((ConvSpec{2, 3, 3, 3, 1, 1, true}).validate(), std::invalid_argument);
}

TEST(ConvTranspose, MatchesScatterOracle) {
  std::mt19937_64 rng(5);
  const Tensor x = random_uniform(Shape{2, 3, 3, 4}, rng);
  const Tensor w = random_uniform(Shape{3, 2, 4, 4}, rng);
  Tape tape;
  const Tensor got = conv_transpose2d(tape.constant(x), tape.constant(w), Var{}, 2, 1).value();
  const Tensor want = naive_conv_transpose(x, w, 2, 1);
  ASSERT_EQ(got.shape(), (Shape{2, 2, 6, 8}));
  EXPECT_LT(max_abs_diff(got, want), 1e-12);
}

TEST(MaskedMoments, HandExamples) {
  Tensor x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  MaskedMoments m = reduce_masked_mean_var(x, Tensor::ones(Shape{1, 1, 2, 2}));
  EXPECT_DOUBLE_EQ(m.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(m.var[0], 1.25);

  Tensor y(Shape{1, 1, 2, 2}, std::vector<double>{5, 5, -7, 11});
  Tensor mask(Shape{1, 1, 2, 2}, std::vector<double>{1, 1, 0, 0});
  m = reduce_masked_mean_var(y, mask);
  EXPECT_DOUBLE_EQ(m.mean[0], 5.0);
  EXPECT_DOUBLE_EQ(m.var[0], 0.0);
  EXPECT_FALSE(m.empty[0]);

  m = reduce_masked_mean_var(y, Tensor(Shape{1, 1, 2, 2}));
  EXPECT_TRUE(m.empty[0]);
  EXPECT_EQ(m.mean[0], 0.0);
  EXPECT_EQ(m.var[0], 1.0);
}

TEST(MaskedMoments, MatchesOracleOnRandomInputs) {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_uniform(Shape{2, 3, 5, 6}, rng, -4, 4);
    Tensor mask(Shape{2, 1, 5, 6});
    for (double& v : mask.data()) v = coin(rng) ? 1.0 : 0.0;
    const MaskedMoments m = reduce_masked_mean_var(x, mask);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 3; ++c) {
        const auto want = testing::plane_moments(x, n, c, mask);
        if (want.count == 0) continue;
        EXPECT_NEAR(m.mean[n * 3 + c], want.mean, 1e-12);
        EXPECT_NEAR(m.var[n * 3 + c], want.var, 1e-12);
      }
  }
}

TEST(Backward, SumGivesOnes) {
  std::mt19937_64 rng(7);
  Tape tape;
  Var x = tape.input(random_uniform(Shape{2, 3, 4, 5}, rng));
  tape.backward(sum(x));
  const Tensor g = tape.grad(x);
  for (double v : g.data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, WeightedSumGivesInput) {
  std::mt19937_64 rng(8);
  const Tensor xv = random_uniform(Shape{1, 2, 3, 3}, rng);
  Tape tape;
  Var w = tape.input(random_uniform(Shape{1, 2, 3, 3}, rng));
  tape.backward(sum(mul(w, tape.constant(xv))));
  EXPECT_EQ(tape.grad(w), xv);
}

TEST(Backward, UnusedParameterGetsZeros) {
  ParameterSet params;
  Parameter& used = params.add("used", Tensor(Shape{1, 1, 2, 2}, 1.5), "weight");
  params.add("unused", Tensor(Shape{1, 1, 3, 3}, 2.0), "weight");
  Tape tape;
  tape.backward(sum(square(tape.param(used))));
  const auto grads = tape.gradients(params);
  ASSERT_EQ(grads.size(), 2u);
  for (double g : grads[0].data()) EXPECT_DOUBLE_EQ(g, 3.0);
  EXPECT_EQ(grads[1].shape(), (Shape{1, 1, 3, 3}));
  for (double g : grads[1].data()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  Var x = tape.input(Tensor(Shape{1, 1, 2, 2}, 1.0));
  EXPECT_THROW(tape.backward(x), std::invalid_argument);
}

TEST(GradCheck, SumOfSquaresIsExact) {
  std::mt19937_64 rng(9);
  const Tensor p = random_uniform(Shape{1, 2, 3, 3}, rng);
  const GradCheckResult r = check_gradient([](Tape&, const Var& v) { return sum(square(v)); }, p);
  EXPECT_EQ(r.probes, p.numel());
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, ReportsNonFiniteCoordinate) {
  Tensor p(Shape{1, 1, 1, 3}, std::vector<double>{1.0, 1e-6, 2.0});
  // log of a coordinate pushed below zero by the probe.
  const GradCheckResult r = check_gradient([](Tape&, const Var& v) { return sum(log(v)); }, p, 1e-5);
  ASSERT_TRUE(r.nonfinite_index.has_value());
  EXPECT_EQ(*r.nonfinite_index, 1u);
  EXPECT_FALSE(r.ok(1e-4));
}

TEST(GradCheck, DetectsWrongBackward) {
  // A deliberately wrong rule: forward x^2, backward 3x.
  auto bad = [](Tape&, const Var& v) {
    const std::size_t id = v.id();
    Tensor y = v.value();
    for (double& e : y.data()) e *= e;
    Var out = v.tape().record(std::move(y), {v}, [id](Tape& t, const Tensor& g) {
      Tensor gx = t.value(id) * 3.0;
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] *= g[i];
      t.accumulate(id, gx);
    });
    return sum(out);
  };
  const GradCheckResult r = check_gradient(bad, Tensor(Shape{1, 1, 1, 4}, 1.0));
  EXPECT_GT(r.max_rel_error, 0.4);
}

TEST(GradCheck, ElementwiseOpsAtDefaultStep) {
  std::mt19937_64 rng(10);
  const Tensor p = random_uniform(Shape{1, 2, 3, 4}, rng, 0.2, 1.5);
  const Tensor c = random_uniform(Shape{1, 2, 3, 4}, rng);
  const std::vector<std::pair<const char*, ScalarFn>> fns = {
      {"sigmoid", [](Tape&, const Var& v) { return sum(sigmoid(v)); }},
      {"softplus", [](Tape&, const Var& v) { return sum(softplus(scale(v, -2.0))); }},
      {"log", [](Tape&, const Var& v) { return sum(log(v)); }},
      {"leaky", [](Tape&, const Var& v) { return sum(leaky_relu(add_scalar(v, -0.9), 0.2)); }},
      {"mean*mul", [&](Tape& t, const Var& v) { return mean(mul(v, add_constant(v, c))); }},
      {"resize", [](Tape&, const Var& v) { return sum(square(resize_bilinear(v, 5, 7))); }},
      {"concat", [](Tape&, const Var& v) { return sum(square(concat_channels({v, scale(v, 2.0)}))); }},
  };
  for (const auto& [name, f] : fns) EXPECT_LT(check_gradient(f, p).max_rel_error, 1e-4) << name;
}

TEST(Tensor, FileRoundTrip) {
  std::mt19937_64 rng(11);
  const Tensor t = random_uniform(Shape{2, 3, 4, 5}, rng, -1e6, 1e6);
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "SNAD");
  EXPECT_EQ(bytes.size(), 4 + 2 + 2 + 16 + t.numel() * 8);
  EXPECT_EQ(read_tensor(ss), t);
}

TEST(Tensor, FileRejectsBadMagicAndTruncation) {
  std::stringstream bad("XXXX");
  EXPECT_ANY_THROW(read_tensor(bad));
  std::stringstream ss;
  write_tensor(ss, Tensor(Shape{1, 1, 2, 2}, 3.0));
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_ANY_THROW(read_tensor(cut));
}

TEST(Determinism, IdenticalForwardPassesAreBitwiseEqual) {
  auto run = [] {
    std::mt19937_64 rng(12);
    const Tensor x = random_uniform(Shape{2, 3, 8, 8}, rng);
    const Tensor w = random_uniform(Shape{4, 3, 3, 3}, rng);
    Tape tape;
    Var xi = tape.input(x);
    Var y = relu(conv2d(xi, tape.constant(w), Var{}, ConvSpec::same(3, 4)));
    Var loss = sum(square(y));
    tape.backward(loss);
    return std::make_pair(y.value(), tape.grad(xi));
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace snad
