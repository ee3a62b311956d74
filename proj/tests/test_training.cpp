#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "snad/training.hpp"

namespace snad {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("snad_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig small_config() {
  TrainConfig c;
  c.steps = 2;
  c.batch_size = 2;
  c.image_count = 4;
  c.seed = 3;
  return c;
}

std::vector<Sample> small_samples(const TrainConfig& c) {
  return make_training_set(synth_dataset(c.image_count, c.image_size, c.seed), c);
}

TEST(TrainConfig, KeyValueRoundTrip) {
  TrainConfig c;
  c.steps = 37;
  c.lr = 1.5e-4;
  c.blur_kernel = "traj";
  c.norm = NormKind::kInstance;
  c.weights.rec_hair = 7.25;
  const KeyValues kv = c.to_key_values();
  const TrainConfig back = TrainConfig::from_key_values(parse_key_values(format_key_values(kv)));
  EXPECT_EQ(back.to_key_values(), kv);
  EXPECT_EQ(back.steps, 37u);
  EXPECT_EQ(back.norm, NormKind::kInstance);
  EXPECT_DOUBLE_EQ(back.weights.rec_hair, 7.25);
}

TEST(TrainConfig, DefaultsMatchOptimizerSettings) {
  const TrainConfig c;
  EXPECT_EQ(c.lr, 2e-4);
  EXPECT_EQ(c.beta1, 0.5);
  EXPECT_EQ(c.beta2, 0.999);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfig, RejectsUnknownKeysAndBadValues) {
  KeyValues kv = TrainConfig{}.to_key_values();
  kv["learning_rate"] = "0.1";
  EXPECT_THROW(TrainConfig::from_key_values(kv), std::invalid_argument);
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(parse_key_values("steps 10\n"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIntoFreshModel) {
  const fs::path dir = scratch_dir("ckpt");
  ToyGenerator a(GeneratorConfig{}, 1), b(GeneratorConfig{}, 2);
  save_checkpoint(dir.string(), a.parameters());
  load_checkpoint(dir.string(), b.parameters());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
}

TEST(Checkpoint, RejectsMismatchedModelAndMissingDir) {
  const fs::path dir = scratch_dir("ckpt_bad");
  ToyGenerator full(GeneratorConfig{}, 1), reduced(GeneratorConfig::reduced(), 1);
  save_checkpoint(dir.string(), full.parameters());
  EXPECT_ANY_THROW(load_checkpoint(dir.string(), reduced.parameters()));
  EXPECT_THROW(load_checkpoint((dir / "nope").string(), full.parameters()), std::runtime_error);
}

TEST(Training, ZeroStepsCheckpointsInitialization) {
  TrainConfig c = small_config();
  c.steps = 0;
  const fs::path dir = scratch_dir("zero_steps");
  const TrainResult r = train_toy(c, small_samples(c), dir.string());
  EXPECT_TRUE(r.history.empty());
  Trainer fresh(c, small_samples(c));
  ToyGenerator loaded(GeneratorConfig{}, 12345);
  load_checkpoint((dir / "generator").string(), loaded.parameters());
  const ParameterSet& init = fresh.generator().parameters();
  for (std::size_t i = 0; i < init.size(); ++i) EXPECT_EQ(init[i].value, loaded.parameters()[i].value) << init[i].name;
}

TEST(Training, DeterministicForFixedSeed) {
  const TrainConfig c = small_config();
  Trainer a(c, small_samples(c)), b(c, small_samples(c));
  for (int k = 0; k < 2; ++k) {
    const StepMetrics ma = a.step(), mb = b.step();
    EXPECT_EQ(ma.total_g, mb.total_g);
    EXPECT_EQ(ma.adv_d, mb.adv_d);
    EXPECT_TRUE(std::isfinite(ma.total_g));
  }
  EXPECT_EQ(a.steps_done(), 2u);
  for (std::size_t i = 0; i < a.generator().parameters().size(); ++i)
    EXPECT_EQ(a.generator().parameters()[i].value, b.generator().parameters()[i].value);
}

TEST(Training, NonFiniteLossRaisesDiverged) {
  const TrainConfig c = small_config();
  Trainer t(c, small_samples(c));
  Parameter* head = t.generator().parameters().find("gen.head.bias");
  ASSERT_NE(head, nullptr);
  head->value[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)t.step();
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_FALSE(e.component().empty());
  }
}

TEST(Adam, MatchesHandIteration) {
  ParameterSet params;
  params.add("w", Tensor(Shape{1, 1, 1, 2}, std::vector<double>{0.5, -1.0}), "weight");
  Adam adam(0.1, 0.9, 0.99, 1e-8);
  const std::vector<std::vector<double>> grads = {{1.0, -3.0}, {-2.0, 0.5}, {0.5, 0.0}};
  double w[2] = {0.5, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    adam.update(params, {Tensor(Shape{1, 1, 1, 2}, grads[t - 1])});
    for (int j = 0; j < 2; ++j) {
      const double g = grads[t - 1][static_cast<std::size_t>(j)];
      m[j] = 0.9 * m[j] + 0.1 * g;
      v[j] = 0.99 * v[j] + 0.01 * g * g;
      const double mh = m[j] / (1 - std::pow(0.9, t)), vh = v[j] / (1 - std::pow(0.99, t));
      w[j] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(params[0].value[static_cast<std::size_t>(j)], w[j], 1e-14);
    }
  }
  EXPECT_EQ(adam.steps(), 3u);
  EXPECT_THROW(adam.update(params, {}), std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet params;
  params.add("w", Tensor(Shape{1, 1, 1, 3}, std::vector<double>{0, 0, 0}), "weight");
  Adam adam(2e-4, 0.5, 0.999, 1e-8);
  adam.update(params, {Tensor(Shape{1, 1, 1, 3}, std::vector<double>{5.0, -0.01, 300.0})});
  EXPECT_NEAR(params[0].value[0], -2e-4, 1e-9);
  EXPECT_NEAR(params[0].value[1], 2e-4, 1e-9);
  EXPECT_NEAR(params[0].value[2], -2e-4, 1e-9);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const fs::path dir = scratch_dir("dataset");
  const auto images = synth_dataset(3, 32, 5);
  save_dataset(dir.string(), images);
  EXPECT_TRUE(fs::exists(dir / "0002_img.ppm"));
  const auto back = load_dataset(dir.string(), 3);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].image, images[i].image);
    EXPECT_EQ(back[i].labels, images[i].labels);
  }
  EXPECT_ANY_THROW(load_dataset(dir.string(), 4));
}

TEST(Dataset, TrainingSetBlursDeterministically) {
  const TrainConfig c = small_config();
  const auto a = small_samples(c), b = small_samples(c);
  ASSERT_EQ(a.size(), c.image_count);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].blurred, b[i].blurred);
    EXPECT_GT(max_abs_diff(a[i].blurred, a[i].clean), 1e-3);
  }
}

TEST(Reporting, StepAndAblationCsv) {
  std::ostringstream steps;
  write_step_csv(steps, {StepMetrics{1, 0.1, 0.2, 0.3, 0.4, 5.0, 20.0}});
  EXPECT_EQ(steps.str().substr(0, steps.str().find('\n')), "step,rec,tex,adv_g,adv_d,total_g,psnr_train");

  std::vector<AblationRow> rows(3);
  rows[0] = {"bn-ad", 100, 9.0, 8.0, 20.0, false, ""};
  rows[1] = {"in-ad", 100, 9.0, std::numeric_limits<double>::quiet_NaN(), 0.0, true, "diverged"};
  rows[2] = {"sn-ad", 100, 9.0, 6.0, 22.0, false, ""};
  std::ostringstream os;
  write_ablation_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "variant,steps,initial_total_g,final_total_g,final_psnr_train,diverged,rank");
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].substr(0, 6), "bn-ad,");
  EXPECT_EQ(lines[0].back(), '2');
  EXPECT_EQ(lines[1].back(), '3');
  EXPECT_EQ(lines[2].back(), '1');
}

TEST(Reporting, HeadAndTailMeans) {
  std::vector<StepMetrics> rows;
  for (std::size_t k = 1; k <= 10; ++k) rows.push_back(StepMetrics{k, 0, 0, 0, 0, static_cast<double>(k), 0});
  EXPECT_DOUBLE_EQ(head_mean(rows, 3), 2.0);
  EXPECT_DOUBLE_EQ(tail_mean(rows, 3), 9.0);
}

}  // namespace
}  // namespace snad
