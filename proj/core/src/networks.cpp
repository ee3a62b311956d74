#include "snad/networks.hpp"

#include <algorithm>
#include <cmath>

namespace snad {

MaskPyramid MaskPyramid::build(const RegionMasks& full, std::size_t levels) {
  MaskPyramid p;
  std::size_t h = full.height(), w = full.width();
  for (std::size_t l = 0; l < levels; ++l) {
    if (h == 0 || w == 0) throw ShapeError("mask pyramid: image too small for " + std::to_string(levels) + " levels");
    p.masks.push_back(l == 0 ? full : downsample_masks(full, h, w));
    p.onehot.push_back(p.masks.back().onehot());
    h /= 2;
    w /= 2;
  }
  return p;
}

std::size_t MaskPyramid::level_for(std::size_t height, std::size_t width) const {
  for (std::size_t l = 0; l < masks.size(); ++l)
    if (masks[l].height() == height && masks[l].width() == width) return l;
  throw ShapeError("mask pyramid has no " + std::to_string(height) + "x" + std::to_string(width) + " scale");
}

GeneratorConfig GeneratorConfig::reduced() {
  GeneratorConfig c;
  c.image_size = 16;
  c.channels[0] = 4;
  c.channels[1] = 8;
  c.channels[2] = 8;
  c.ad_hidden = 4;
  return c;
}

ResBlock ResBlock::create(ParameterSet& params, const std::string& name, std::size_t channels, InitRng& rng) {
  const ConvSpec spec = ConvSpec::same(channels, channels);
  // Second conv of each unit scaled down so the block starts near identity.
  return ResBlock{ConvLayer::create(params, name + ".unit1.conv1", spec, rng),
                  ConvLayer::create(params, name + ".unit1.conv2", spec, rng, Init::kHe, 0.1),
                  ConvLayer::create(params, name + ".unit2.conv1", spec, rng),
                  ConvLayer::create(params, name + ".unit2.conv2", spec, rng, Init::kHe, 0.1)};
}

Var ResBlock::operator()(Tape& tape, const Var& x) const {
  Var y = relu(add(x, b1(tape, relu(a1(tape, x)))));
  return relu(add(y, b2(tape, relu(a2(tape, y)))));
}

ToyGenerator::ToyGenerator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  const std::size_t s = config.image_size;
  if (s < 16 || s % 8 != 0) throw std::invalid_argument("generator image size must be a multiple of 8, >= 16");
  InitRng rng(seed);
  const std::size_t* c = config.channels;
  stem_ = ConvLayer::create(params_, "gen.stem", ConvSpec::same(3, c[0]), rng);
  for (std::size_t i = 0; i < 3; ++i) {
    enc_[i] = ResBlock::create(params_, "gen.enc" + std::to_string(i + 1), c[i], rng);
    const std::size_t next = i < 2 ? c[i + 1] : c[2];
    down_[i] = ConvLayer::create(params_, "gen.down" + std::to_string(i + 1), ConvSpec::down(c[i], next), rng);
  }
  // dec_[0] runs at S/8 -> S/4, dec_[2] at S/2 -> S.
  dec_[0] = SnadBlockParams::create(params_, "gen.dec3", c[2], c[2], rng, config.ad_hidden);
  dec_[1] = SnadBlockParams::create(params_, "gen.dec2", c[2], c[1], rng, config.ad_hidden);
  dec_[2] = SnadBlockParams::create(params_, "gen.dec1", c[1], c[0], rng, config.ad_hidden);
  tex_[0] = TexBranchParams::create(params_, "gen.tex2", c[1], rng);
  tex_[1] = TexBranchParams::create(params_, "gen.tex1", c[0], rng);
  head_ = ConvLayer::create(params_, "gen.head", ConvSpec::same(c[0], 3), rng, Init::kZero);
}

GeneratorOutput ToyGenerator::forward(Tape& tape, const Tensor& blurred, const MaskPyramid& pyramid) const {
  const Shape& in = blurred.shape();
  const std::size_t s = config_.image_size;
  if (in.c != 3 || in.h != s || in.w != s)
    throw ShapeError("generator expects (N,3," + std::to_string(s) + "," + std::to_string(s) + "), got " + in.str());

  auto level = [&](const Var& v) { return pyramid.level_for(v.shape().h, v.shape().w); };
  Var x = tape.constant(blurred);
  Var e1 = enc_[0](tape, relu(stem_(tape, x)));
  Var e2 = enc_[1](tape, relu(down_[0](tape, e1)));
  Var e3 = enc_[2](tape, relu(down_[1](tape, e2)));
  Var d = relu(down_[2](tape, e3));

  GeneratorOutput out;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t l = level(d);
    d = snad_block(d, pyramid.masks[l], pyramid.onehot[l], dec_[i], config_.norm);
    const Var& skip = i == 0 ? e3 : (i == 1 ? e2 : e1);
    d = add(d, skip);
    if (i >= 1) {
      TexBranchOutput t = texture_branch(d, tex_[i - 1]);
      d = t.features;
      out.textures.push_back(t.texture.shape().h == s ? t.texture : resize_bilinear(t.texture, s, s));
    }
  }

  // Residual in logit space: a zero head returns the clamped input.
  Tensor logit(in);
  const double lo = config_.input_clamp, hi = 1.0 - config_.input_clamp;
  for (std::size_t i = 0; i < logit.numel(); ++i) {
    const double p = std::clamp(blurred[i], lo, hi);
    logit[i] = std::log(p / (1.0 - p));
  }
  out.image = sigmoid(add_constant(head_(tape, d), logit));
  return out;
}

ToyDiscriminator::ToyDiscriminator(const DiscriminatorConfig& config, std::uint64_t seed) : config_(config) {
  if (config.image_size != 32) throw std::invalid_argument("discriminator is laid out for 32x32 inputs");
  InitRng rng(seed);
  std::size_t in = 3;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t half = config.channels[i] / 2;
    const std::string name = "disc.block" + std::to_string(i + 1);
    blocks_[i].wide = SpectralConv::create(params_, name + ".wide", ConvSpec{half, in, 4, 4, 2, 1, false}, rng);
    blocks_[i].narrow =
        SpectralConv::create(params_, name + ".narrow", ConvSpec{config.channels[i] - half, in, 3, 3, 2, 1, false}, rng);
    in = config.channels[i];
  }
  for (std::size_t k = 0; k < 3; ++k)
    heads_[k] = SpectralConv::create(params_, "disc.patch_head" + std::to_string(k + 1),
                                     ConvSpec::same(config.channels[k + 1], 1), rng);
  global_ = SpectralLinear::create(params_, "disc.global", config.channels[3] * 2 * 2, 1, rng);
  for (auto& b : blocks_) b.wide.iters = b.narrow.iters = config.power_iterations;
  for (auto& h : heads_) h.iters = config.power_iterations;
  global_.iters = config.power_iterations;
}

DiscOutputs ToyDiscriminator::forward(Tape& tape, const Var& image) {
  const Shape& s = image.shape();
  if (s.c != 3 || s.h != config_.image_size || s.w != config_.image_size)
    throw ShapeError("discriminator expects (N,3,32,32), got " + s.str());
  Var x = image;
  Var stage[4];
  for (std::size_t i = 0; i < 4; ++i) {
    x = leaky_relu(concat_channels({blocks_[i].wide(tape, x), blocks_[i].narrow(tape, x)}), config_.leak);
    stage[i] = x;
  }
  DiscOutputs out;
  out.patch8 = heads_[0](tape, stage[1]);
  out.patch4 = heads_[1](tape, stage[2]);
  out.patch2 = heads_[2](tape, stage[3]);
  out.global = global_(tape, stage[3]);
  return out;
}

std::vector<SpectralState*> ToyDiscriminator::spectral_states() {
  std::vector<SpectralState*> out;
  for (auto& b : blocks_) {
    out.push_back(&b.wide.state);
    out.push_back(&b.narrow.state);
  }
  for (auto& h : heads_) out.push_back(&h.state);
  out.push_back(&global_.state);
  return out;
}

void ToyDiscriminator::set_frozen(bool frozen) {
  for (SpectralState* s : spectral_states()) s->frozen = frozen;
}

std::vector<Tensor> ToyDiscriminator::normalized_weights() const {
  std::vector<Tensor> out;
  for (const auto& b : blocks_) {
    out.push_back(b.wide.normalized_weight());
    out.push_back(b.narrow.normalized_weight());
  }
  for (const auto& h : heads_) out.push_back(h.normalized_weight());
  out.push_back(global_.normalized_weight());
  return out;
}

}  // namespace snad
