#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "snad/image.hpp"
#include "snad/tensor.hpp"

namespace snad {

/// Binary masks derived from label maps, one (N,1,H,W) tensor each.
/// foreground = facial | skin | hair, background = back; regions[k] is the
/// one-hot mask of Region k.
struct RegionMasks {
  Tensor foreground;
  Tensor background;
  std::array<Tensor, kRegionCount> regions;

  std::size_t batch() const { return foreground.shape().n; }
  std::size_t height() const { return foreground.shape().h; }
  std::size_t width() const { return foreground.shape().w; }
  const Tensor& region(Region r) const { return regions[static_cast<std::size_t>(r)]; }

  /// (N, 4, H, W) one-hot label encoding in Region order.
  Tensor onehot() const;
  /// Throws std::logic_error if the partition invariants do not hold.
  void check_partition() const;
};

RegionMasks split_foreground(const LabelMap& map);
/// Batched variant; all maps must share dimensions.
RegionMasks split_foreground(std::span<const LabelMap> maps);

/// Nearest-neighbor downsampling of an (N,C,H,W) mask: output pixel (y, x)
/// takes source (floor(y*H/h), floor(x*W/w)). Rejects upsampling.
Tensor downsample_mask(const Tensor& mask, std::size_t target_h, std::size_t target_w);
RegionMasks downsample_masks(const RegionMasks& masks, std::size_t target_h, std::size_t target_w);

}  // namespace snad
