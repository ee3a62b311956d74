#include "snad/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace snad {

double LossWeights::rec_weight(Region r) const {
  switch (r) {
    case Region::kFacial: return rec_facial;
    case Region::kSkin: return rec_skin;
    case Region::kHair: return rec_hair;
    case Region::kBack: return rec_back;
  }
  return 0.0;
}

void LossWeights::validate() const {
  const std::pair<const char*, double> positive[] = {
      {"rec_skin", rec_skin},     {"rec_facial", rec_facial}, {"rec_hair", rec_hair},
      {"rec_back", rec_back},     {"adv_global", adv_global}, {"adv_patch2", adv_patch2},
      {"adv_patch4", adv_patch4}, {"adv_patch8", adv_patch8}, {"lambda_rec", lambda_rec},
      {"lambda_adv", lambda_adv}, {"focal_alpha", focal_alpha}};
  for (const auto& [name, value] : positive)
    if (!(value > 0.0)) throw std::invalid_argument(std::string("loss weight ") + name + " must be > 0");
  if (!(focal_gamma >= 0.0)) throw std::invalid_argument("loss weight focal_gamma must be >= 0");
}

namespace {

std::vector<std::size_t> true_class(const Shape& ps, std::span<const LabelMap> labels) {
  if (ps.c != kRegionCount) throw ShapeError("focal_loss: probabilities need 4 channels, got " + ps.str());
  if (labels.size() != ps.n) throw ShapeError("focal_loss: label count does not match batch");
  std::vector<std::size_t> cls(ps.n * ps.plane());
  for (std::size_t n = 0; n < ps.n; ++n) {
    if (labels[n].height != ps.h || labels[n].width != ps.w)
      throw ShapeError("focal_loss: label map " + std::to_string(n) + " does not match " + ps.str());
    for (std::size_t i = 0; i < ps.plane(); ++i) cls[n * ps.plane() + i] = static_cast<std::size_t>(labels[n].labels[i]);
  }
  return cls;
}

}  // namespace

Var focal_loss(const Var& probs, std::span<const LabelMap> labels, double alpha, double gamma, FocalStats* stats) {
  const Tensor& p = probs.value();
  const Shape& ps = p.shape();
  const auto cls = true_class(ps, labels);
  const std::size_t hw = ps.plane();
  const double count = static_cast<double>(cls.size());
  // Index into p of each pixel's labeled probability, and dloss/dp there.
  std::vector<std::size_t> where(cls.size());
  std::vector<double> dp(cls.size());
  double total = 0.0;
  std::size_t clamped = 0;
  for (std::size_t n = 0; n < ps.n; ++n)
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t k = n * hw + i;
      where[k] = (n * ps.c + cls[k]) * hw + i;
      double pt = p[where[k]];
      bool at_clamp = false;
      if (pt < kFocalClamp) {
        pt = kFocalClamp;
        at_clamp = true;
        ++clamped;
      }
      const double q = 1.0 - pt;
      const double lg = std::log(pt);
      total += -alpha * std::pow(q, gamma) * lg;
      if (!at_clamp) {
        const double dq = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
        dp[k] = -alpha * (-dq * lg + std::pow(q, gamma) / pt) / count;
      }
    }
  if (stats) stats->clamped += clamped;
  const std::size_t ip = probs.id();
  return probs.tape().record(Tensor::scalar(total / count), {probs},
                             [ip, where = std::move(where), dp = std::move(dp)](Tape& t, const Tensor& g) {
                               Tensor& gp = t.grad_buffer(ip);
                               for (std::size_t k = 0; k < where.size(); ++k) gp[where[k]] += g[0] * dp[k];
                             });
}

double focal_loss(const Tensor& probs, std::span<const LabelMap> labels, double alpha, double gamma,
                  FocalStats* stats) {
  Tape tape;
  return focal_loss(tape.constant(probs), labels, alpha, gamma, stats).value().item();
}

std::array<Var, kRegionCount> region_rec_terms(const Var& generated, const Tensor& target, const RegionMasks& masks) {
  require_same_shape(generated.value(), target, "region_rec_loss");
  const Shape& s = target.shape();
  if (masks.batch() != s.n || masks.height() != s.h || masks.width() != s.w)
    throw ShapeError("region_rec_loss: masks do not match image " + s.str());
  Var diff = abs(add_constant(generated, target * -1.0));
  std::array<Var, kRegionCount> terms;
  const std::size_t hw = s.plane();
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    const Tensor& m = masks.regions[r];
    // Per-pixel weight mask / (count_n * C * N); zero for empty samples.
    Tensor weight(m.shape());
    for (std::size_t n = 0; n < s.n; ++n) {
      double count = 0.0;
      for (std::size_t i = 0; i < hw; ++i) count += m[n * hw + i];
      if (count == 0.0) continue;
      const double scale = 1.0 / (count * static_cast<double>(s.c) * static_cast<double>(s.n));
      for (std::size_t i = 0; i < hw; ++i) weight[n * hw + i] = m[n * hw + i] * scale;
    }
    terms[r] = sum(mul_mask(diff, weight));
  }
  return terms;
}

Var region_rec_loss(const Var& generated, const Tensor& target, const RegionMasks& masks, const LossWeights& w) {
  const auto terms = region_rec_terms(generated, target, masks);
  std::vector<Var> parts(terms.begin(), terms.end());
  std::vector<double> weights;
  for (std::size_t r = 0; r < kRegionCount; ++r) weights.push_back(w.rec_weight(static_cast<Region>(r)));
  return weighted_sum(parts, weights);
}

double region_rec_loss(const Tensor& generated, const Tensor& target, const RegionMasks& masks,
                       const LossWeights& w) {
  Tape tape;
  return region_rec_loss(tape.constant(generated), target, masks, w).value().item();
}

Var texture_loss(const std::vector<Var>& predicted, const Tensor& target) {
  if (predicted.empty()) throw std::invalid_argument("texture_loss: no predictions");
  const Shape& s = target.shape();
  const double per_channel = static_cast<double>(s.n * s.plane());
  std::vector<Var> parts;
  for (const Var& p : predicted) {
    require_same_shape(p.value(), target, "texture_loss");
    parts.push_back(sum(abs(add_constant(p, target * -1.0))));
  }
  return weighted_sum(parts, std::vector<double>(parts.size(), 1.0 / per_channel));
}

namespace {

Var relativistic(const DiscOutputs& a, const DiscOutputs& b, const LossWeights& w) {
  const std::pair<const Var*, const Var*> heads[] = {
      {&a.global, &b.global}, {&a.patch2, &b.patch2}, {&a.patch4, &b.patch4}, {&a.patch8, &b.patch8}};
  std::vector<Var> parts;
  for (const auto& [x, y] : heads) {
    require_same_shape(x->value(), y->value(), "relativistic loss");
    parts.push_back(mean(softplus(scale(sub(*x, *y), -1.0))));
  }
  return weighted_sum(parts, {w.adv_global, w.adv_patch2, w.adv_patch4, w.adv_patch8});
}

}  // namespace

Var relativistic_g_loss(const DiscOutputs& fake, const DiscOutputs& real, const LossWeights& w) {
  return relativistic(fake, real, w);
}

Var relativistic_d_loss(const DiscOutputs& fake, const DiscOutputs& real, const LossWeights& w) {
  return relativistic(real, fake, w);
}

Var generator_total(const Var& rec, const Var& adv, const Var& tex, const LossWeights& w) {
  return weighted_sum({rec, adv, tex}, {w.lambda_rec, w.lambda_adv, 1.0});
}

double generator_total(double rec, double adv, double tex, const LossWeights& w) {
  return w.lambda_rec * rec + w.lambda_adv * adv + tex;
}

}  // namespace snad
