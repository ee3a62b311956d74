#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "snad/autodiff.hpp"
#include "snad/layers.hpp"
#include "snad/losses.hpp"
#include "snad/masks.hpp"
#include "snad/normalization.hpp"
#include "snad/spectral.hpp"
#include "snad/texture.hpp"

namespace snad {

/// Masks and one-hot label maps at every resolution the generator needs,
/// from full size down by powers of two.
struct MaskPyramid {
  std::vector<RegionMasks> masks;
  std::vector<Tensor> onehot;

  static MaskPyramid build(const RegionMasks& full, std::size_t levels);
  /// Throws ShapeError naming the missing resolution.
  std::size_t level_for(std::size_t height, std::size_t width) const;
};

struct GeneratorConfig {
  std::size_t image_size = 32;
  std::size_t channels[3] = {16, 32, 64};
  std::size_t ad_hidden = AdParams::kHidden;
  NormKind norm = NormKind::kSeparable;
  /// Input clamp before the logit of the global residual.
  double input_clamp = 1e-3;

  static GeneratorConfig reduced();  // 16x16, narrow, for gradient checks
};

/// Two residual units y = relu(x + conv(relu(conv(x)))).
struct ResBlock {
  ConvLayer a1, b1, a2, b2;
  static ResBlock create(ParameterSet& params, const std::string& name, std::size_t channels, InitRng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

struct GeneratorOutput {
  Var image;                   // (N,3,H,W) in (0,1)
  std::vector<Var> textures;   // predicted texture maps resized to image size
};

/// Encoder of ResBlocks with stride-2 downsampling, a stride-2 bottleneck,
/// a decoder of SNAD blocks with additive skips from the encoder, texture
/// branches on the two shallowest decoder stages and a zero-initialized
/// output head applied as a residual in logit space.
class ToyGenerator {
 public:
  ToyGenerator(const GeneratorConfig& config, std::uint64_t seed);

  GeneratorOutput forward(Tape& tape, const Tensor& blurred, const MaskPyramid& pyramid) const;

  const GeneratorConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::size_t pyramid_levels() const { return 4; }

 private:
  GeneratorConfig config_;
  ParameterSet params_;
  ConvLayer stem_;
  ResBlock enc_[3];
  ConvLayer down_[3];
  SnadBlockParams dec_[3];
  TexBranchParams tex_[2];
  ConvLayer head_;
};

struct DiscriminatorConfig {
  std::size_t image_size = 32;
  std::size_t channels[4] = {16, 32, 64, 64};
  double leak = 0.2;
  std::size_t power_iterations = 1;
};

/// Four spectrally normalized blocks, each a 4x4 and a 3x3 stride-2 branch
/// in parallel; 3x3 patch heads on the last three blocks and a dense
/// global head on the last block.
class ToyDiscriminator {
 public:
  ToyDiscriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  /// Advances every layer's power iteration (unless frozen).
  DiscOutputs forward(Tape& tape, const Var& image);

  const DiscriminatorConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Freezes or releases every power-iteration state.
  void set_frozen(bool frozen);
  /// Normalized weights of every conv and dense layer, as (dim0, rest).
  std::vector<Tensor> normalized_weights() const;
  std::vector<SpectralState*> spectral_states();

 private:
  struct Block {
    SpectralConv wide;    // 4x4
    SpectralConv narrow;  // 3x3
  };
  DiscriminatorConfig config_;
  ParameterSet params_;
  Block blocks_[4];
  SpectralConv heads_[3];  // on blocks 2, 3, 4
  SpectralLinear global_;
};

}  // namespace snad
