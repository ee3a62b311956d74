#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "snad/blur.hpp"
#include "snad/checkpoint.hpp"
#include "snad/image.hpp"
#include "snad/losses.hpp"
#include "snad/networks.hpp"
#include "snad/texture.hpp"

namespace snad {

struct TrainConfig {
  std::size_t steps = 200;
  std::size_t batch_size = 4;
  std::size_t image_count = 16;
  std::size_t image_size = 32;
  std::uint64_t seed = 0;
  // Adam.
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Blur applied once per image.
  std::string blur_kernel = "linear";  // linear | traj
  std::size_t blur_size = 5;
  double blur_angle = 45.0;
  double noise = 0.03;
  NormKind norm = NormKind::kSeparable;
  LaplacianStencil stencil = LaplacianStencil::kFourNeighbor;
  LossWeights weights;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint

  void validate() const;
  KeyValues to_key_values() const;
  /// Unknown keys are rejected.
  static TrainConfig from_key_values(const KeyValues& kv);
};

struct Sample {
  Tensor clean;    // (1,3,S,S)
  Tensor blurred;  // (1,3,S,S)
  LabelMap labels;
};

/// Blurs every image with its own kernel and noise, both seeded from
/// (config.seed, index).
std::vector<Sample> make_training_set(const std::vector<LabeledImage>& images, const TrainConfig& config);
std::vector<LabeledImage> synth_dataset(std::size_t count, std::size_t size, std::uint64_t seed);
/// Reads NNNN_img.ppm / NNNN_lbl.pgm pairs 0..count-1 from dir.
std::vector<LabeledImage> load_dataset(const std::string& dir, std::size_t count);
void save_dataset(const std::string& dir, const std::vector<LabeledImage>& images);

/// Bias-corrected Adam over a ParameterSet.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void update(ParameterSet& params, const std::vector<Tensor>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct StepMetrics {
  std::size_t step = 0;
  double rec = 0, tex = 0, adv_g = 0, adv_d = 0, total_g = 0, psnr_train = 0;
};
void write_step_csv(std::ostream& os, const std::vector<StepMetrics>& rows);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& component)
      : std::runtime_error("non-finite " + component + " at step " + std::to_string(step)),
        step_(step),
        component_(component) {}
  std::size_t step() const { return step_; }
  const std::string& component() const { return component_; }

 private:
  std::size_t step_;
  std::string component_;
};

/// One generator, one discriminator, two optimizers and the sample order.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::vector<Sample> samples);

  /// One D-step then one G-step on the next batch.
  StepMetrics step();

  /// Mean per-image PSNR of (generated, clean) and (blurred, clean) over the
  /// whole training set.
  struct Evaluation {
    double psnr_generated = 0.0;
    double psnr_blurred = 0.0;
  };
  Evaluation evaluate() const;

  ToyGenerator& generator() { return generator_; }
  ToyDiscriminator& discriminator() { return discriminator_; }
  std::size_t steps_done() const { return step_; }

 private:
  std::vector<std::size_t> next_batch();

  TrainConfig config_;
  std::vector<Sample> samples_;
  ToyGenerator generator_;
  ToyDiscriminator discriminator_;
  Adam adam_g_, adam_d_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
  std::uint64_t shuffle_state_;
};

struct TrainResult {
  std::vector<StepMetrics> history;
  Trainer::Evaluation evaluation;
};

/// Runs config.steps steps. With a nonempty checkpoint_dir, writes
/// generator/ and discriminator/ checkpoints at the end (and every
/// checkpoint_every steps under step_NNNNNN/).
TrainResult train_toy(const TrainConfig& config, const std::vector<Sample>& samples,
                      const std::string& checkpoint_dir = "");

/// Mean of total_g over the first / last `window` rows.
double head_mean(const std::vector<StepMetrics>& rows, std::size_t window);
double tail_mean(const std::vector<StepMetrics>& rows, std::size_t window);

struct AblationRow {
  std::string variant;  // bn-ad, in-ad, sn-ad
  std::size_t steps = 0;
  double initial_total = 0.0;
  double final_total = 0.0;
  double final_psnr_train = 0.0;
  bool diverged = false;
  std::string note;
};

/// Trains BN-AD, IN-AD and SN-AD generators from identical seeds and data.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<Sample>& samples);
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace snad
