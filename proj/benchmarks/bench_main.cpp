#include <benchmark/benchmark.h>

#include <random>

#include "snad/blur.hpp"
#include "snad/normalization.hpp"
#include "snad/spectral.hpp"
#include "snad/suites.hpp"
#include "snad/training.hpp"

namespace {

using namespace snad;

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(0);
  const Tensor x = random_tensor(Shape{4, c, s, s}, rng);
  const ConvSpec spec = ConvSpec::same(c, c);
  const Tensor w = random_tensor(spec.weight_shape(), rng);
  for (auto _ : state) {
    Tape tape;
    Var y = conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor(Shape{c, 1, 1, 1})), spec);
    benchmark::DoNotOptimize(y.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv3x3)->Args({16, 32})->Args({32, 16})->Args({64, 8});

void BM_SeparableNormForwardBackward(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const RegionMasks masks = split_foreground(random_labels(rng, 4, s, s));
  const Tensor x = random_tensor(Shape{4, 16, s, s}, rng);
  for (auto _ : state) {
    Tape tape;
    Var xv = tape.constant(x);
    Var y = sn_forward(xv, masks);
    tape.backward(sum(y));
    benchmark::DoNotOptimize(y.value().data().data());
  }
}
BENCHMARK(BM_SeparableNormForwardBackward)->Arg(8)->Arg(32);

void BM_SpectralNormalize(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Tensor w = random_tensor(Shape{64, 64, 4, 4}, rng);
  SpectralState s = SpectralState::create(64, 1024, 3);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_normalize(w, s, 1).data().data());
}
BENCHMARK(BM_SpectralNormalize);

void BM_ApplyTrajectoryBlur(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(Shape{1, 3, 32, 32}, rng, 0, 1);
  const BlurKernel k = trajectory_kernel(7);
  for (auto _ : state) benchmark::DoNotOptimize(apply_blur(x, k, 0.03, 1).data().data());
}
BENCHMARK(BM_ApplyTrajectoryBlur);

void BM_TrainingStep(benchmark::State& state) {
  TrainConfig config;
  config.image_count = 4;
  const auto samples = make_training_set(synth_dataset(config.image_count, config.image_size, 0), config);
  Trainer trainer(config, samples);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step().total_g);
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
