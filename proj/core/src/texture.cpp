#include "snad/texture.hpp"

#include <algorithm>
#include <cmath>

namespace snad {

std::array<double, 9> laplacian_stencil(LaplacianStencil stencil) {
  if (stencil == LaplacianStencil::kEightNeighbor) return {1, 1, 1, 1, -8, 1, 1, 1, 1};
  return {0, 1, 0, 1, -4, 1, 0, 1, 0};
}

Tensor extract_texture(const Tensor& image, LaplacianStencil stencil) {
  const Shape& s = image.shape();
  if (s.c != 3) throw ShapeError("extract_texture: expected 3 channels, got " + s.str());
  const auto k = laplacian_stencil(stencil);
  const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = image.plane(n, c);
      double* dst = out.plane(n, c);
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          double acc = 0.0;
          for (long dy = -1; dy <= 1; ++dy) {
            const long sy = std::clamp(y + dy, 0L, h - 1);
            for (long dx = -1; dx <= 1; ++dx) {
              const double kv = k[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)];
              if (kv != 0.0) acc += kv * src[sy * w + std::clamp(x + dx, 0L, w - 1)];
            }
          }
          dst[y * w + x] = acc;
        }
    }
  return out;
}

std::uint8_t texture_to_byte(double t) {
  return static_cast<std::uint8_t>(std::lround(128.0 + std::clamp(64.0 * t, -128.0, 127.0)));
}

TexBranchParams TexBranchParams::create(ParameterSet& params, const std::string& name, std::size_t channels,
                                        InitRng& rng) {
  TexBranchParams p;
  p.channels = channels;
  p.conv1 = ConvLayer::create(params, name + ".conv1", ConvSpec::same(channels, channels), rng);
  p.conv2 = ConvLayer::create(params, name + ".conv2", ConvSpec::same(channels, channels), rng);
  p.texture_head = ConvLayer::create(params, name + ".texture_head", ConvSpec::same(channels, 3), rng, Init::kZero);
  p.residual_head =
      ConvLayer::create(params, name + ".residual_head", ConvSpec::same(channels, channels), rng, Init::kZero);
  return p;
}

TexBranchOutput texture_branch(const Var& features, const TexBranchParams& p) {
  if (features.shape().c != p.channels)
    throw ShapeError("texture_branch: expected " + std::to_string(p.channels) + " channels, got " +
                     features.shape().str());
  Tape& tape = features.tape();
  Var h = relu(p.conv1(tape, features));
  h = relu(p.conv2(tape, h));
  return {add(features, p.residual_head(tape, h)), p.texture_head(tape, h)};
}

}  // namespace snad
