#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "commands.hpp"
#include "snad/image.hpp"
#include "snad/training.hpp"

using namespace snad::cli;

int main(int argc, char** argv) {
  CLI::App app{"snad: separable normalization / adaptive denormalization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--format", g.format, "Console output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write synthetic labeled face-like images (NNNN_img.ppm, NNNN_lbl.pgm)");
  s->add_option("--count", synth.count, "Number of image/label pairs")->capture_default_str();
  s->add_option("--size", synth.size, "Side length in pixels (>= 16)")->capture_default_str();

  BlurArgs blur;
  auto* b = app.add_subcommand("blur", "Blur an image: y = clamp(x * k + noise)");
  b->add_option("--input", blur.input, "Input P5/P6 image")->required();
  b->add_option("--kernel", blur.kernel, "linear45 | traj | identity")->capture_default_str();
  b->add_option("--size", blur.size, "Linear kernel size (odd; 1 selects identity)")->capture_default_str();
  b->add_option("--angle", blur.angle, "Linear kernel angle in degrees")->capture_default_str();
  b->add_option("--noise", blur.noise, "Gaussian noise sigma")->capture_default_str();

  KernelArgs kern;
  auto* k = app.add_subcommand("kernels", "Generate random-trajectory blur kernels (.pgm + .snad)");
  k->add_option("--count", kern.count, "Number of kernels")->capture_default_str();
  k->add_option("--min", kern.min_size, "Smallest side length (odd)")->capture_default_str();
  k->add_option("--max", kern.max_size, "Largest side length (odd)")->capture_default_str();

  CheckArgs check;
  auto* c = app.add_subcommand("check", "Run invariant suites; exit 0 iff all pass");
  c->add_option("--suite", check.suite, "norm | decomp | grad | spectral | all")
      ->check(CLI::IsMember({"norm", "decomp", "grad", "spectral", "all"}))
      ->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train-toy", "Train the toy generator/discriminator");
  t->add_option("--data", train.data, "Dataset directory (default: synthesize --count images from --seed)");
  t->add_option("--steps", train.steps, "Training steps")->capture_default_str();
  t->add_option("--count", train.count, "Number of training images")->capture_default_str();
  t->add_option("--config", train.config, "key=value config file");
  t->add_option("--report", train.report, "Metrics CSV (default <out>/metrics.csv)");
  t->add_option("--norm", train.norm, "sn | in | bn")->check(CLI::IsMember({"sn", "in", "bn"}))->capture_default_str();

  MetricArgs metrics;
  auto* m = app.add_subcommand("metrics", "PSNR / SSIM / L1 between two images");
  m->add_option("--a", metrics.a, "First image")->required();
  m->add_option("--b", metrics.b, "Second image")->required();
  m->add_option("--report", metrics.report, "Metric CSV (pair_id,psnr_db,ssim,l1_pct)");

  TextureArgs texture;
  auto* x = app.add_subcommand("texture", "Laplacian texture map of an RGB image");
  x->add_option("--input", texture.input, "Input P6 image")->required();
  x->add_option("--stencil", texture.stencil, "4 or 8 neighbors")->capture_default_str();

  AblateArgs ablate;
  auto* a = app.add_subcommand("ablate", "Train BN-AD, IN-AD and SN-AD variants and compare");
  a->add_option("--data", ablate.data, "Dataset directory (default: synthetic)");
  a->add_option("--steps", ablate.steps, "Steps per variant")->capture_default_str();
  a->add_option("--count", ablate.count, "Number of training images")->capture_default_str();
  a->add_option("--report", ablate.report, "Comparison CSV (default <out>/ablation.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*s) return cmd_synth(g, synth);
    if (*b) return cmd_blur(g, blur);
    if (*k) return cmd_kernels(g, kern);
    if (*c) return cmd_check(g, check);
    if (*t) return cmd_train_toy(g, train);
    if (*m) return cmd_metrics(g, metrics);
    if (*x) return cmd_texture(g, texture);
    if (*a) return cmd_ablate(g, ablate);
  } catch (const std::logic_error& e) {
    // invalid_argument derives from logic_error but is a user input problem.
    if (dynamic_cast<const std::invalid_argument*>(&e)) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const snad::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
