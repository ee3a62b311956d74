#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "snad/autodiff.hpp"
#include "snad/image.hpp"
#include "snad/masks.hpp"

namespace snad {

struct LossWeights {
  // Reconstruction, per region.
  double rec_skin = 12.0;
  double rec_facial = 10.0;
  double rec_hair = 8.0;
  double rec_back = 6.0;
  // Adversarial heads; larger receptive field, larger weight.
  double adv_global = 1.0;
  double adv_patch2 = 0.8;  // 2x2 logit map
  double adv_patch4 = 0.4;  // 4x4
  double adv_patch8 = 0.2;  // 8x8
  // Generator total.
  double lambda_rec = 120.0;
  double lambda_adv = 0.1;
  // Focal loss.
  double focal_alpha = 1.0;
  double focal_gamma = 2.0;

  /// Weight of a region's reconstruction term.
  double rec_weight(Region r) const;
  double adv_sum() const { return adv_global + adv_patch2 + adv_patch4 + adv_patch8; }
  /// Throws std::invalid_argument unless every weight is > 0 (gamma >= 0).
  void validate() const;
};

// ---- focal ----------------------------------------------------------------------

inline constexpr double kFocalClamp = 1e-12;

struct FocalStats {
  std::size_t clamped = 0;  // pixels whose true-class probability hit the clamp
};

/// Mean over pixels of -alpha (1 - p)^gamma log p, p the probability of the
/// labeled class. probs is (N, 4, H, W) in Region channel order.
Var focal_loss(const Var& probs, std::span<const LabelMap> labels, double alpha, double gamma,
               FocalStats* stats = nullptr);
double focal_loss(const Tensor& probs, std::span<const LabelMap> labels, double alpha, double gamma,
                  FocalStats* stats = nullptr);

// ---- reconstruction --------------------------------------------------------------

/// Per-region terms in Region order (facial, skin, hair, back). Each term is
/// the batch mean of sum|mask (g - t)| / (mask pixels * channels); samples
/// with an empty region contribute 0.
std::array<Var, kRegionCount> region_rec_terms(const Var& generated, const Tensor& target, const RegionMasks& masks);
/// Weighted sum of the region terms.
Var region_rec_loss(const Var& generated, const Tensor& target, const RegionMasks& masks, const LossWeights& w);
double region_rec_loss(const Tensor& generated, const Tensor& target, const RegionMasks& masks,
                       const LossWeights& w);

// ---- texture ---------------------------------------------------------------------

/// Sum over stages and channels of the mean absolute difference. Every
/// prediction must already match the target's shape.
Var texture_loss(const std::vector<Var>& predicted, const Tensor& target);

// ---- adversarial -----------------------------------------------------------------

/// Discriminator logits: three patch maps and a global (N,1,1,1) logit.
struct DiscOutputs {
  Var patch8;  // (N,1,8,8)
  Var patch4;  // (N,1,4,4)
  Var patch2;  // (N,1,2,2)
  Var global;  // (N,1,1,1)
};

/// sum_k w_k mean softplus(-(fake_k - real_k)).
Var relativistic_g_loss(const DiscOutputs& fake, const DiscOutputs& real, const LossWeights& w);
/// sum_k w_k mean softplus(-(real_k - fake_k)).
Var relativistic_d_loss(const DiscOutputs& fake, const DiscOutputs& real, const LossWeights& w);

// ---- totals ----------------------------------------------------------------------

Var generator_total(const Var& rec, const Var& adv, const Var& tex, const LossWeights& w);
double generator_total(double rec, double adv, double tex, const LossWeights& w = {});

}  // namespace snad
