#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "snad/blur.hpp"
#include "snad/image.hpp"
#include "snad/metrics.hpp"
#include "snad/suites.hpp"
#include "snad/texture.hpp"
#include "snad/training.hpp"

namespace snad::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

void require_out(const Globals& g, const char* command) {
  if (g.out.empty()) throw ValidationError(std::string(command) + ": --out is required");
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create output directory " + dir);
  const fs::path probe = fs::path(dir) / ".snad_write_probe";
  std::ofstream f(probe);
  if (!f) throw ValidationError("output directory is not writable: " + dir);
  f.close();
  fs::remove(probe, ec);
}

Image read_image(const std::string& path) {
  try {
    return read_netpbm(path);
  } catch (const FormatError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<Sample> training_samples(const Globals& g, const std::string& data, std::size_t count,
                                     const TrainConfig& config) {
  const auto images = data.empty() ? synth_dataset(count, config.image_size, g.seed) : load_dataset(data, count);
  return make_training_set(images, config);
}

KeyValues with_globals(const Globals& g, KeyValues kv) {
  kv["seed"] = std::to_string(g.seed);
  kv["out"] = g.out;
  kv["format"] = g.format;
  return kv;
}

}  // namespace

void write_sidecar(const Globals& g, const std::string& command, const KeyValues& kv, bool out_is_dir) {
  if (g.out.empty()) return;
  KeyValues all = kv;
  all["command"] = command;
  const std::string path = out_is_dir ? (fs::path(g.out) / "resolved_config.txt").string() : g.out + ".config.txt";
  write_key_values(path, all);
}

int cmd_synth(const Globals& g, const SynthArgs& a) {
  require_out(g, "synth");
  if (a.size < kMinSceneSize)
    throw ValidationError("synth: --size " + std::to_string(a.size) + " is below the minimum of " +
                          std::to_string(kMinSceneSize));
  make_dir(g.out);
  save_dataset(g.out, synth_dataset(a.count, a.size, g.seed));
  write_sidecar(g, "synth", with_globals(g, {{"count", std::to_string(a.count)}, {"size", std::to_string(a.size)}}),
                true);
  std::cout << "wrote " << a.count << " image/label pairs to " << g.out << '\n';
  return 0;
}

int cmd_blur(const Globals& g, const BlurArgs& a) {
  require_out(g, "blur");
  if (a.noise < 0.0) throw ValidationError("blur: --noise must be >= 0");
  const Image img = read_image(a.input);
  BlurKernel k;
  if (a.kernel == "identity" || a.size == 1)
    k = identity_kernel();
  else if (a.kernel == "linear45" || a.kernel == "linear") {
    if (a.size < 3 || a.size % 2 == 0) throw ValidationError("blur: --size must be odd and >= 3 (or 1 for identity)");
    k = linear_kernel(a.size, a.angle);
  } else if (a.kernel == "traj") {
    k = trajectory_kernel(g.seed);
  } else {
    throw ValidationError("blur: --kernel must be linear45, traj or identity");
  }
  const Tensor out = apply_blur(image_to_tensor(img), k, a.noise, g.seed);
  write_netpbm(tensor_to_image(out), g.out);
  write_sidecar(g, "blur",
                with_globals(g, {{"input", a.input},
                                 {"kernel", a.kernel},
                                 {"size", std::to_string(k.size)},
                                 {"angle", num(a.angle)},
                                 {"noise", num(a.noise)}}),
                false);
  std::cout << "blurred " << a.input << " with a " << k.size << "x" << k.size << " kernel -> " << g.out << '\n';
  return 0;
}

int cmd_kernels(const Globals& g, const KernelArgs& a) {
  require_out(g, "kernels");
  if (a.min_size < 3 || a.min_size % 2 == 0 || a.max_size % 2 == 0 || a.max_size < a.min_size)
    throw ValidationError("kernels: --min/--max must be odd, >= 3 and ordered");
  make_dir(g.out);
  TrajectoryParams p;
  p.min_size = a.min_size;
  p.max_size = a.max_size;
  json summary = json::array();
  for (std::size_t i = 0; i < a.count; ++i) {
    const BlurKernel k = trajectory_kernel(g.seed + i, p);
    k.check_invariants();
    std::ostringstream stem;
    stem << "kernel_" << std::setw(4) << std::setfill('0') << i;
    Image vis(k.size, k.size, 1);
    vis.samples = kernel_to_gray(k);
    write_netpbm(vis, (fs::path(g.out) / (stem.str() + ".pgm")).string());
    save_tensor((fs::path(g.out) / (stem.str() + ".snad")).string(), k.tensor());
    summary.push_back({{"index", i}, {"seed", g.seed + i}, {"size", k.size}, {"sum", k.sum()}});
  }
  write_sidecar(g, "kernels",
                with_globals(g, {{"count", std::to_string(a.count)},
                                 {"min", std::to_string(a.min_size)},
                                 {"max", std::to_string(a.max_size)}}),
                true);
  if (g.format == "json")
    std::cout << summary.dump(2) << '\n';
  else
    for (const auto& row : summary)
      std::cout << "kernel " << row["index"] << " seed " << row["seed"] << " size " << row["size"] << '\n';
  return 0;
}

int cmd_check(const Globals& g, const CheckArgs& a) {
  std::vector<CheckResult> results;
  try {
    results = run_suite(a.suite, g.seed);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (g.format == "json") {
    json rows = json::array();
    for (const auto& r : results)
      rows.push_back({{"suite", r.suite}, {"check", r.name}, {"value", r.value}, {"threshold", r.threshold},
                      {"passed", r.passed}, {"detail", r.detail}});
    std::cout << rows.dump(2) << '\n';
  } else {
    print_check_table(std::cout, results);
  }
  write_sidecar(g, "check", with_globals(g, {{"suite", a.suite}}), false);
  return all_passed(results) ? 0 : 2;
}

int cmd_train_toy(const Globals& g, const TrainArgs& a) {
  require_out(g, "train-toy");
  TrainConfig config;
  if (!a.config.empty()) config = TrainConfig::from_key_values(read_key_values(a.config));
  config.steps = a.steps;
  config.seed = g.seed;
  config.image_count = a.count;
  config.norm = parse_norm_kind(a.norm);
  config.validate();
  make_dir(g.out);
  const auto samples = training_samples(g, a.data, a.count, config);
  const TrainResult result = train_toy(config, samples, (fs::path(g.out) / "checkpoints").string());
  const std::string report = a.report.empty() ? (fs::path(g.out) / "metrics.csv").string() : a.report;
  {
    std::ofstream csv(report);
    if (!csv) throw ValidationError("cannot write report " + report);
    write_step_csv(csv, result.history);
  }
  KeyValues kv = with_globals(g, config.to_key_values());
  kv["data"] = a.data.empty() ? "synthetic" : a.data;
  kv["report"] = report;
  write_sidecar(g, "train-toy", kv, true);

  const double first = head_mean(result.history, 10), last = tail_mean(result.history, 10);
  if (g.format == "json") {
    std::cout << json{{"steps", config.steps},
                      {"initial_total_g", first},
                      {"final_total_g", last},
                      {"psnr_blurred", result.evaluation.psnr_blurred},
                      {"psnr_generated", result.evaluation.psnr_generated},
                      {"report", report}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << "steps " << config.steps << "\ninitial total_g (10-step mean) " << first
              << "\nfinal total_g (10-step mean) " << last << "\ntraining-set PSNR blurred "
              << result.evaluation.psnr_blurred << " dB, generated " << result.evaluation.psnr_generated
              << " dB\nmetrics " << report << '\n';
  }
  return 0;
}

int cmd_metrics(const Globals& g, const MetricArgs& a) {
  const Tensor ta = image_to_tensor(read_image(a.a)), tb = image_to_tensor(read_image(a.b));
  if (ta.shape() != tb.shape()) throw ValidationError("metrics: images differ in shape");
  const MetricRow row = compare_images(fs::path(a.a).stem().string() + ":" + fs::path(a.b).stem().string(), ta, tb);
  if (!a.report.empty()) {
    std::ofstream csv(a.report);
    if (!csv) throw ValidationError("cannot write report " + a.report);
    write_metric_csv(csv, {row});
  }
  if (g.format == "json")
    std::cout << json{{"psnr_db", psnr_for_text(row.psnr_db)}, {"ssim", row.ssim}, {"l1_pct", row.l1_pct}}.dump(2)
              << '\n';
  else
    std::cout << std::fixed << std::setprecision(4) << "PSNR " << psnr_for_text(row.psnr_db) << " dB\nSSIM "
              << row.ssim << "\nL1 " << row.l1_pct << " %\n";
  write_sidecar(g, "metrics", with_globals(g, {{"a", a.a}, {"b", a.b}, {"report", a.report}}), false);
  return 0;
}

int cmd_texture(const Globals& g, const TextureArgs& a) {
  require_out(g, "texture");
  if (a.stencil != "4" && a.stencil != "8") throw ValidationError("texture: --stencil must be 4 or 8");
  const Image img = read_image(a.input);
  if (img.channels != 3) throw ValidationError("texture: input must be an RGB (P6) image");
  const Tensor t = extract_texture(image_to_tensor(img), a.stencil == "4" ? LaplacianStencil::kFourNeighbor
                                                                         : LaplacianStencil::kEightNeighbor);
  Image vis(img.width, img.height, 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) vis.at(x, y, c) = texture_to_byte(t.at(0, c, y, x));
  write_netpbm(vis, g.out);
  save_tensor(g.out + ".snad", t);
  write_sidecar(g, "texture", with_globals(g, {{"input", a.input}, {"stencil", a.stencil}}), false);
  std::cout << "texture map -> " << g.out << " (exact values in " << g.out << ".snad)\n";
  return 0;
}

int cmd_ablate(const Globals& g, const AblateArgs& a) {
  require_out(g, "ablate");
  TrainConfig config;
  config.steps = a.steps;
  config.seed = g.seed;
  config.image_count = a.count;
  config.validate();
  make_dir(g.out);
  const auto rows = run_ablation(config, training_samples(g, a.data, a.count, config));
  const std::string report = a.report.empty() ? (fs::path(g.out) / "ablation.csv").string() : a.report;
  {
    std::ofstream csv(report);
    if (!csv) throw ValidationError("cannot write report " + report);
    write_ablation_csv(csv, rows);
  }
  write_ablation_csv(std::cout, rows);
  KeyValues kv = with_globals(g, config.to_key_values());
  kv.erase("norm");
  kv["variants"] = "bn,in,sn";
  kv["report"] = report;
  write_sidecar(g, "ablate", kv, true);
  for (const auto& r : rows)
    if (r.diverged) return 1;
  return 0;
}

}  // namespace snad::cli
