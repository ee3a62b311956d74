#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "snad/autodiff.hpp"
#include "snad/layers.hpp"

namespace snad {

enum class LaplacianStencil { kFourNeighbor, kEightNeighbor };

/// 3x3 stencil, row-major: [0 1 0; 1 -4 1; 0 1 0] or [1 1 1; 1 -8 1; 1 1 1].
std::array<double, 9> laplacian_stencil(LaplacianStencil stencil);

/// Per-channel Laplacian of an (N, 3, H, W) image with replicate padding.
Tensor extract_texture(const Tensor& image, LaplacianStencil stencil = LaplacianStencil::kFourNeighbor);

/// Visualization byte for a texture response: 128 + clamp(64 t).
std::uint8_t texture_to_byte(double t);

/// Two 3x3 convs on the decoder feature, then a texture head (C -> 3) and a
/// residual head (C -> C). Both heads start at zero.
struct TexBranchParams {
  std::size_t channels = 0;
  ConvLayer conv1, conv2;
  ConvLayer texture_head, residual_head;

  static TexBranchParams create(ParameterSet& params, const std::string& name, std::size_t channels, InitRng& rng);
};

struct TexBranchOutput {
  Var features;  // F + F_t
  Var texture;   // predicted t'_G at feature resolution
};

TexBranchOutput texture_branch(const Var& features, const TexBranchParams& params);

}  // namespace snad
