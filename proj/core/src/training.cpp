#include "snad/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "snad/metrics.hpp"

namespace snad {

namespace fs = std::filesystem;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config " + key + ": not a number: '" + v + "'");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long u = 0;
  try {
    if (!v.empty() && v[0] != '-') u = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config " + key + ": not a nonnegative integer: '" + v + "'");
  return u;
}

Tensor stack(const std::vector<const Tensor*>& parts) {
  const Shape& s = parts.front()->shape();
  Tensor out(Shape{parts.size(), s.c, s.h, s.w});
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i]->data().begin(), parts[i]->data().end(), out.data().begin() + static_cast<long>(i * s.numel()));
  return out;
}

struct Batch {
  Tensor clean, blurred;
  std::vector<LabelMap> labels;
  RegionMasks masks;
  MaskPyramid pyramid;
};

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, std::size_t levels) {
  Batch b;
  std::vector<const Tensor*> clean, blurred;
  for (std::size_t i : idx) {
    clean.push_back(&samples[i].clean);
    blurred.push_back(&samples[i].blurred);
    b.labels.push_back(samples[i].labels);
  }
  b.clean = stack(clean);
  b.blurred = stack(blurred);
  b.masks = split_foreground(b.labels);
  b.pyramid = MaskPyramid::build(b.masks, levels);
  return b;
}

void require_finite(double v, std::size_t step, const char* component) {
  if (!std::isfinite(v)) throw TrainingDiverged(step, component);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0 || image_count == 0) throw std::invalid_argument("config: batch_size and image_count must be > 0");
  if (batch_size > image_count) throw std::invalid_argument("config: batch_size exceeds image_count");
  if (image_size != 32) throw std::invalid_argument("config: image_size must be 32 for the toy networks");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("config: Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
  if (blur_kernel != "linear" && blur_kernel != "traj" && blur_kernel != "identity")
    throw std::invalid_argument("config: blur_kernel must be linear, traj or identity");
  if (blur_kernel == "linear" && (blur_size < 3 || blur_size % 2 == 0))
    throw std::invalid_argument("config: blur_size must be odd and >= 3");
  if (!(noise >= 0.0)) throw std::invalid_argument("config: noise must be >= 0");
  weights.validate();
}

KeyValues TrainConfig::to_key_values() const {
  return {
      {"steps", std::to_string(steps)},
      {"batch_size", std::to_string(batch_size)},
      {"image_count", std::to_string(image_count)},
      {"image_size", std::to_string(image_size)},
      {"seed", std::to_string(seed)},
      {"lr", fmt(lr)},
      {"beta1", fmt(beta1)},
      {"beta2", fmt(beta2)},
      {"adam_eps", fmt(adam_eps)},
      {"blur_kernel", blur_kernel},
      {"blur_size", std::to_string(blur_size)},
      {"blur_angle", fmt(blur_angle)},
      {"noise", fmt(noise)},
      {"norm", norm_kind_name(norm)},
      {"stencil", stencil == LaplacianStencil::kFourNeighbor ? "4" : "8"},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"rec_skin", fmt(weights.rec_skin)},
      {"rec_facial", fmt(weights.rec_facial)},
      {"rec_hair", fmt(weights.rec_hair)},
      {"rec_back", fmt(weights.rec_back)},
      {"adv_global", fmt(weights.adv_global)},
      {"adv_patch2", fmt(weights.adv_patch2)},
      {"adv_patch4", fmt(weights.adv_patch4)},
      {"adv_patch8", fmt(weights.adv_patch8)},
      {"lambda_rec", fmt(weights.lambda_rec)},
      {"lambda_adv", fmt(weights.lambda_adv)},
      {"focal_alpha", fmt(weights.focal_alpha)},
      {"focal_gamma", fmt(weights.focal_gamma)},
  };
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "steps") c.steps = to_uint(k, v);
    else if (k == "batch_size") c.batch_size = to_uint(k, v);
    else if (k == "image_count") c.image_count = to_uint(k, v);
    else if (k == "image_size") c.image_size = to_uint(k, v);
    else if (k == "seed") c.seed = to_uint(k, v);
    else if (k == "lr") c.lr = to_double(k, v);
    else if (k == "beta1") c.beta1 = to_double(k, v);
    else if (k == "beta2") c.beta2 = to_double(k, v);
    else if (k == "adam_eps") c.adam_eps = to_double(k, v);
    else if (k == "blur_kernel") c.blur_kernel = v;
    else if (k == "blur_size") c.blur_size = to_uint(k, v);
    else if (k == "blur_angle") c.blur_angle = to_double(k, v);
    else if (k == "noise") c.noise = to_double(k, v);
    else if (k == "norm") c.norm = parse_norm_kind(v);
    else if (k == "stencil") {
      if (v != "4" && v != "8") throw std::invalid_argument("config stencil: expected 4 or 8");
      c.stencil = v == "4" ? LaplacianStencil::kFourNeighbor : LaplacianStencil::kEightNeighbor;
    } else if (k == "checkpoint_every") c.checkpoint_every = to_uint(k, v);
    else if (k == "rec_skin") c.weights.rec_skin = to_double(k, v);
    else if (k == "rec_facial") c.weights.rec_facial = to_double(k, v);
    else if (k == "rec_hair") c.weights.rec_hair = to_double(k, v);
    else if (k == "rec_back") c.weights.rec_back = to_double(k, v);
    else if (k == "adv_global") c.weights.adv_global = to_double(k, v);
    else if (k == "adv_patch2") c.weights.adv_patch2 = to_double(k, v);
    else if (k == "adv_patch4") c.weights.adv_patch4 = to_double(k, v);
    else if (k == "adv_patch8") c.weights.adv_patch8 = to_double(k, v);
    else if (k == "lambda_rec") c.weights.lambda_rec = to_double(k, v);
    else if (k == "lambda_adv") c.weights.lambda_adv = to_double(k, v);
    else if (k == "focal_alpha") c.weights.focal_alpha = to_double(k, v);
    else if (k == "focal_gamma") c.weights.focal_gamma = to_double(k, v);
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
  return c;
}

std::vector<Sample> make_training_set(const std::vector<LabeledImage>& images, const TrainConfig& config) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::uint64_t s = splitmix(config.seed * 0x100000001b3ull + i);
    BlurKernel k;
    if (config.blur_kernel == "linear")
      k = linear_kernel(config.blur_size, config.blur_angle);
    else if (config.blur_kernel == "traj")
      k = trajectory_kernel(s);
    else
      k = identity_kernel();
    Sample sm;
    sm.clean = image_to_tensor(images[i].image);
    if (sm.clean.shape().c != 3) throw ShapeError("training images must be RGB");
    sm.blurred = apply_blur(sm.clean, k, config.noise, splitmix(s));
    sm.labels = images[i].labels;
    out.push_back(std::move(sm));
  }
  return out;
}

std::vector<LabeledImage> synth_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_scene(seed + i, size));
  return out;
}

std::vector<LabeledImage> load_dataset(const std::string& dir, std::size_t count) {
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    LabeledImage li;
    li.image = read_netpbm((fs::path(dir) / dataset_image_name(i)).string());
    li.labels = read_labelmap((fs::path(dir) / dataset_label_name(i)).string());
    if (li.image.width != li.labels.width || li.image.height != li.labels.height)
      throw ShapeError("image and label map " + std::to_string(i) + " differ in size");
    out.push_back(std::move(li));
  }
  return out;
}

void save_dataset(const std::string& dir, const std::vector<LabeledImage>& images) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    write_netpbm(images[i].image, (fs::path(dir) / dataset_image_name(i)).string());
    write_labelmap(images[i].labels, (fs::path(dir) / dataset_label_name(i)).string());
  }
}

void Adam::update(ParameterSet& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw std::invalid_argument("Adam: gradient count mismatch");
  if (m_.empty())
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params[i].value.shape());
      v_.emplace_back(params[i].value.shape());
    }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].value;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void write_step_csv(std::ostream& os, const std::vector<StepMetrics>& rows) {
  os << "step,rec,tex,adv_g,adv_d,total_g,psnr_train\n";
  for (const StepMetrics& r : rows)
    os << r.step << ',' << fmt(r.rec) << ',' << fmt(r.tex) << ',' << fmt(r.adv_g) << ',' << fmt(r.adv_d) << ','
       << fmt(r.total_g) << ',' << fmt(psnr_for_text(r.psnr_train)) << '\n';
}

namespace {

GeneratorConfig generator_config(const TrainConfig& c) {
  GeneratorConfig g;
  g.image_size = c.image_size;
  g.norm = c.norm;
  return g;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::vector<Sample> samples)
    : config_(config),
      samples_(std::move(samples)),
      generator_(generator_config(config), splitmix(config.seed ^ 0x67656eull)),
      discriminator_(DiscriminatorConfig{}, splitmix(config.seed ^ 0x646973ull)),
      adam_g_(config.lr, config.beta1, config.beta2, config.adam_eps),
      adam_d_(config.lr, config.beta1, config.beta2, config.adam_eps),
      shuffle_state_(splitmix(config.seed ^ 0x736866ull)) {
  config_.validate();
  if (samples_.size() < config_.batch_size) throw std::invalid_argument("training set smaller than one batch");
}

std::vector<std::size_t> Trainer::next_batch() {
  std::vector<std::size_t> idx;
  while (idx.size() < config_.batch_size) {
    if (cursor_ == order_.size()) {
      order_.resize(samples_.size());
      std::iota(order_.begin(), order_.end(), 0);
      // Fisher-Yates with an explicit generator so the order is portable.
      for (std::size_t i = order_.size(); i > 1; --i) {
        shuffle_state_ = splitmix(shuffle_state_);
        std::swap(order_[i - 1], order_[shuffle_state_ % i]);
      }
      cursor_ = 0;
    }
    idx.push_back(order_[cursor_++]);
  }
  return idx;
}

StepMetrics Trainer::step() {
  const std::size_t k = step_ + 1;
  const Batch b = make_batch(samples_, next_batch(), generator_.pyramid_levels());
  const Tensor texture_target = extract_texture(b.clean, config_.stencil);
  const LossWeights& w = config_.weights;

  Tape gt;
  const GeneratorOutput go = generator_.forward(gt, b.blurred, b.pyramid);

  StepMetrics m;
  m.step = k;
  {
    Tape dt;
    const DiscOutputs fake = discriminator_.forward(dt, dt.constant(go.image.value()));
    const DiscOutputs real = discriminator_.forward(dt, dt.constant(b.clean));
    const Var ld = relativistic_d_loss(fake, real, w);
    m.adv_d = ld.value().item();
    require_finite(m.adv_d, k, "adv_d");
    dt.backward(ld);
    adam_d_.update(discriminator_.parameters(), dt.gradients(discriminator_.parameters()));
  }

  const DiscOutputs fake = discriminator_.forward(gt, go.image);
  const DiscOutputs real = discriminator_.forward(gt, gt.constant(b.clean));
  const Var rec = region_rec_loss(go.image, b.clean, b.masks, w);
  const Var tex = texture_loss(go.textures, texture_target);
  const Var adv = relativistic_g_loss(fake, real, w);
  const Var total = generator_total(rec, adv, tex, w);
  m.rec = rec.value().item();
  m.tex = tex.value().item();
  m.adv_g = adv.value().item();
  m.total_g = total.value().item();
  require_finite(m.rec, k, "rec");
  require_finite(m.tex, k, "tex");
  require_finite(m.adv_g, k, "adv_g");
  require_finite(m.total_g, k, "total_g");
  m.psnr_train = psnr(go.image.value(), b.clean);
  gt.backward(total);
  const auto grads = gt.gradients(generator_.parameters());
  for (const Tensor& g : grads)
    if (!g.all_finite()) throw TrainingDiverged(k, "generator gradient");
  adam_g_.update(generator_.parameters(), grads);
  step_ = k;
  return m;
}

Trainer::Evaluation Trainer::evaluate() const {
  Evaluation e;
  const std::size_t bs = config_.batch_size;
  for (std::size_t start = 0; start < samples_.size(); start += bs) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(samples_.size(), start + bs); ++i) idx.push_back(i);
    const Batch b = make_batch(samples_, idx, generator_.pyramid_levels());
    Tape tape;
    const Tensor out = generator_.forward(tape, b.blurred, b.pyramid).image.value();
    const std::size_t per = out.numel() / idx.size();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const Shape one{1, 3, out.shape().h, out.shape().w};
      auto slice = [&](const Tensor& t) {
        return Tensor(one, std::vector<double>(t.data().begin() + static_cast<long>(j * per),
                                               t.data().begin() + static_cast<long>((j + 1) * per)));
      };
      const Tensor clean = slice(b.clean);
      e.psnr_generated += psnr(slice(out), clean);
      e.psnr_blurred += psnr(slice(b.blurred), clean);
    }
  }
  e.psnr_generated /= static_cast<double>(samples_.size());
  e.psnr_blurred /= static_cast<double>(samples_.size());
  return e;
}

TrainResult train_toy(const TrainConfig& config, const std::vector<Sample>& samples, const std::string& checkpoint_dir) {
  Trainer trainer(config, samples);
  TrainResult result;
  auto save = [&](const fs::path& dir) {
    save_checkpoint((dir / "generator").string(), trainer.generator().parameters());
    save_checkpoint((dir / "discriminator").string(), trainer.discriminator().parameters());
  };
  for (std::size_t s = 0; s < config.steps; ++s) {
    result.history.push_back(trainer.step());
    if (!checkpoint_dir.empty() && config.checkpoint_every > 0 && (s + 1) % config.checkpoint_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(6) << std::setfill('0') << (s + 1);
      save(fs::path(checkpoint_dir) / name.str());
    }
  }
  if (!checkpoint_dir.empty()) save(fs::path(checkpoint_dir));
  result.evaluation = trainer.evaluate();
  return result;
}

double head_mean(const std::vector<StepMetrics>& rows, std::size_t window) {
  const std::size_t n = std::min(window, rows.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += rows[i].total_g;
  return s / static_cast<double>(n);
}

double tail_mean(const std::vector<StepMetrics>& rows, std::size_t window) {
  const std::size_t n = std::min(window, rows.size());
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) s += rows[i].total_g;
  return s / static_cast<double>(n);
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::vector<Sample>& samples) {
  std::vector<AblationRow> rows;
  for (NormKind kind : {NormKind::kBatch, NormKind::kInstance, NormKind::kSeparable}) {
    TrainConfig c = base;
    c.norm = kind;
    AblationRow row;
    row.variant = std::string(norm_kind_name(kind)) + "-ad";
    row.steps = c.steps;
    try {
      Trainer trainer(c, samples);
      std::vector<StepMetrics> history;
      for (std::size_t s = 0; s < c.steps; ++s) history.push_back(trainer.step());
      row.initial_total = head_mean(history, 10);
      row.final_total = tail_mean(history, 10);
      row.final_psnr_train = history.empty() ? 0.0 : history.back().psnr_train;
    } catch (const TrainingDiverged& e) {
      row.diverged = true;
      row.note = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].diverged != rows[b].diverged) return !rows[a].diverged;
    return rows[a].final_total < rows[b].final_total;
  });
  std::vector<std::size_t> rank(rows.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  os << "variant,steps,initial_total_g,final_total_g,final_psnr_train,diverged,rank\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    os << r.variant << ',' << r.steps << ',' << fmt(r.initial_total) << ',' << fmt(r.final_total) << ','
       << fmt(psnr_for_text(r.final_psnr_train)) << ',' << (r.diverged ? 1 : 0) << ',' << rank[i] << '\n';
  }
}

}  // namespace snad
