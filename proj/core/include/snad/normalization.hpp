#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "snad/autodiff.hpp"
#include "snad/layers.hpp"
#include "snad/masks.hpp"

namespace snad {

inline constexpr double kNormEps = 1e-5;

/// Per-(b, c) statistics gathered by separable normalization. Entries are
/// indexed b * C + c. Empty regions carry the sentinel (mean 0, var 1).
struct SnStats {
  std::size_t batch = 0, channels = 0;
  std::vector<double> mean_fg, var_fg, mean_bg, var_bg;
  std::vector<std::size_t> count_fg, count_bg;  // per b
  double eps = kNormEps;

  bool fg_empty(std::size_t b) const { return count_fg[b] == 0; }
  bool bg_empty(std::size_t b) const { return count_bg[b] == 0; }
};

/// Per-(b, c) mean and biased variance over the pixels where mask != 0.
/// Entries are indexed b * C + c. Slices with an empty mask get (0, 1) and
/// are flagged.
struct MaskedMoments {
  std::vector<double> mean, var;
  std::vector<bool> empty;
};
/// mask is (N, 1, H, W), shared by every channel.
MaskedMoments reduce_masked_mean_var(const Tensor& x, const Tensor& mask);

/// Separable normalization: standardizes the foreground and background of
/// every (b, c) slice independently and sums the two results. No affine.
/// Masks must be at the feature's spatial resolution.
Var sn_forward(const Var& features, const RegionMasks& masks, double eps = kNormEps, SnStats* stats = nullptr);

/// Literal reading of the printed foreground formula, (F - mu)^2 / sigma, per
/// region. Forward only; exists so the invariant suite can show it does not
/// standardize.
Tensor sn_forward_squared_variant(const Tensor& features, const RegionMasks& masks, double eps = kNormEps);

/// Instance normalization: stats over (H, W) per (b, c), no affine.
Var instance_norm(const Var& features, double eps = kNormEps);
/// Batch normalization (training statistics): stats over (B, H, W) per c, no affine.
Var batch_norm(const Var& features, double eps = kNormEps);

enum class NormKind { kSeparable, kInstance, kBatch };
const char* norm_kind_name(NormKind kind);
NormKind parse_norm_kind(const std::string& name);  // "sn" | "in" | "bn"

Var normalize(NormKind kind, const Var& features, const RegionMasks& masks, double eps = kNormEps);

/// Denormalization parameters: a shared conv on the one-hot label map
/// followed by a gamma head and a beta head.
struct AdParams {
  ConvLayer shared;
  ConvLayer gamma;
  ConvLayer beta;

  static constexpr std::size_t kHidden = 16;

  /// Heads are zero-initialized so a fresh layer is the identity
  /// denormalization.
  static AdParams create(ParameterSet& params, const std::string& name, std::size_t channels, InitRng& rng,
                         std::size_t hidden = kHidden);
};

/// F_out = F * (1 + gamma) + beta with gamma = gamma_head(shared(P)),
/// beta = beta_head(shared(P)); P is the (N, 4, H, W) one-hot label map.
Var ad_forward(const Var& normalized, const Tensor& onehot, const AdParams& params);

/// SN followed by AD.
Var snad_layer(const Var& features, const RegionMasks& masks, const Tensor& onehot, const AdParams& params,
               NormKind kind = NormKind::kSeparable);

/// Two SNAD -> ReLU -> conv stages, concatenated with a third SNAD branch,
/// then ReLU -> stride-2 transposed conv -> conv. Doubles H and W.
struct SnadBlockParams {
  std::size_t in_channels = 0, out_channels = 0;
  AdParams snad1, snad2, skip;
  ConvLayer conv1, conv2;
  ConvTransposeLayer up;
  ConvLayer conv_out;

  static SnadBlockParams create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                InitRng& rng, std::size_t ad_hidden = AdParams::kHidden);
};

/// masks and onehot at the input resolution.
Var snad_block(const Var& features, const RegionMasks& masks, const Tensor& onehot, const SnadBlockParams& params,
               NormKind kind = NormKind::kSeparable);

// ---- whole-slice decomposition ---------------------------------------------------

struct DecompositionResidual {
  double mean_residual = 0.0;
  double var_residual = 0.0;
  // Supporting values, for reporting.
  double mean = 0.0, var = 0.0;
  double mean_fg = 0.0, var_fg = 0.0, mean_bg = 0.0, var_bg = 0.0;
  std::size_t n_fg = 0, n_bg = 0;
};

/// Computes whole-slice mean/variance directly and via the two-region
/// composition mu = (n_b mu_b + n_f mu_f) / n,
/// var = (n_f var_f + n_b var_b) / n + n_f n_b (mu_b - mu_f)^2 / n^2,
/// returning the absolute differences. mask[i] != 0 marks foreground.
/// Throws if either region is empty.
DecompositionResidual decomposition_oracle(std::span<const double> values, std::span<const double> mask);

/// Largest |masked mean| over every (b, c, region) slice of a normalized
/// tensor, regions given by foreground/background. Empty regions skipped.
double region_bias(const Tensor& normalized, const RegionMasks& masks);

}  // namespace snad
