#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "snad/autodiff.hpp"
#include "snad/layers.hpp"

namespace snad {

inline constexpr double kSpectralEps = 1e-12;

/// Power-iteration vectors for one weight, viewed as a (rows, cols) matrix
/// with rows = dim 0 of the weight and cols = the remaining dims.
struct SpectralState {
  std::vector<double> u;  // rows
  std::vector<double> v;  // cols
  double sigma = 0.0;     // last estimate
  /// When set, forward passes reuse u and v without iterating. Used by
  /// gradient checks so repeated evaluations see the same estimate.
  bool frozen = false;

  /// Random unit u from `seed`; v is filled on the first iteration.
  static SpectralState create(std::size_t rows, std::size_t cols, std::uint64_t seed);
};

/// Runs `iters` power iterations on w (updating state) and returns the
/// estimate u^T W v. Zero matrices yield kSpectralEps.
double power_iteration(const Tensor& weight, SpectralState& state, std::size_t iters);

/// weight / sigma_hat. Updates state unless frozen.
Tensor spectral_normalize(const Tensor& weight, SpectralState& state, std::size_t iters = 1);

/// Differentiable W / sigma_hat with u, v treated as constants:
/// dL/dW = (G - <G, W_sn> u v^T) / sigma_hat.
Var spectral_normalize(const Var& weight, SpectralState& state, std::size_t iters = 1);

/// Largest singular value of the weight viewed as (dim0, rest), by SVD.
double top_singular_value(const Tensor& weight);

/// Convolution whose weight passes through spectral normalization on every
/// forward call. The bias is not normalized.
struct SpectralConv {
  ConvLayer conv;
  SpectralState state;
  std::size_t iters = 1;

  static SpectralConv create(ParameterSet& params, const std::string& name, const ConvSpec& spec, InitRng& rng);
  Var operator()(Tape& tape, const Var& x);
  /// Normalized weight as of the current state (no iteration).
  Tensor normalized_weight() const;
};

/// Dense layer (weight (out, in, 1, 1)) with spectral normalization.
struct SpectralLinear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  SpectralState state;
  std::size_t iters = 1;

  static SpectralLinear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                               InitRng& rng);
  Var operator()(Tape& tape, const Var& x);
  Tensor normalized_weight() const;
};

}  // namespace snad
