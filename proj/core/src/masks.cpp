#include "snad/masks.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace snad {

Tensor RegionMasks::onehot() const {
  const Shape& s = foreground.shape();
  Tensor out(Shape{s.n, kRegionCount, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t k = 0; k < kRegionCount; ++k)
      std::copy_n(regions[k].plane(n, 0), s.plane(), out.plane(n, k));
  return out;
}

void RegionMasks::check_partition() const {
  for (std::size_t i = 0; i < foreground.numel(); ++i) {
    const double f = foreground[i], b = background[i];
    if ((f != 0.0 && f != 1.0) || (b != 0.0 && b != 1.0)) throw std::logic_error("masks: non-binary value");
    if (f + b != 1.0) throw std::logic_error("masks: foreground/background do not partition pixel " + std::to_string(i));
    double total = 0.0;
    for (const Tensor& r : regions) total += r[i];
    if (total != 1.0) throw std::logic_error("masks: regions do not partition pixel " + std::to_string(i));
    const double fg_regions = regions[0][i] + regions[1][i] + regions[2][i];
    if (fg_regions != f) throw std::logic_error("masks: foreground != facial | skin | hair at pixel " + std::to_string(i));
  }
}

RegionMasks split_foreground(const LabelMap& map) { return split_foreground(std::span<const LabelMap>(&map, 1)); }

RegionMasks split_foreground(std::span<const LabelMap> maps) {
  if (maps.empty()) throw std::invalid_argument("split_foreground: no label maps");
  const std::size_t h = maps[0].height, w = maps[0].width;
  const Shape s{maps.size(), 1, h, w};
  RegionMasks m{Tensor(s), Tensor(s), {Tensor(s), Tensor(s), Tensor(s), Tensor(s)}};
  for (std::size_t n = 0; n < maps.size(); ++n) {
    if (maps[n].height != h || maps[n].width != w)
      throw ShapeError("split_foreground: label map " + std::to_string(n) + " has different dimensions");
    for (std::size_t i = 0; i < h * w; ++i) {
      const Region r = maps[n].labels[i];
      const std::size_t at = n * h * w + i;
      m.regions[static_cast<std::size_t>(r)][at] = 1.0;
      if (r == Region::kBack)
        m.background[at] = 1.0;
      else
        m.foreground[at] = 1.0;
    }
  }
  return m;
}

Tensor downsample_mask(const Tensor& mask, std::size_t target_h, std::size_t target_w) {
  const Shape& s = mask.shape();
  if (target_h == 0 || target_w == 0) throw ShapeError("downsample_mask: zero target size");
  if (target_h > s.h || target_w > s.w)
    throw ShapeError("downsample_mask: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                     " larger than source " + std::to_string(s.h) + "x" + std::to_string(s.w));
  Tensor out(Shape{s.n, s.c, target_h, target_w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = mask.plane(n, c);
      double* dst = out.plane(n, c);
      for (std::size_t y = 0; y < target_h; ++y) {
        const std::size_t sy = y * s.h / target_h;
        for (std::size_t x = 0; x < target_w; ++x) dst[y * target_w + x] = src[sy * s.w + x * s.w / target_w];
      }
    }
  return out;
}

RegionMasks downsample_masks(const RegionMasks& m, std::size_t target_h, std::size_t target_w) {
  RegionMasks out;
  out.foreground = downsample_mask(m.foreground, target_h, target_w);
  out.background = downsample_mask(m.background, target_h, target_w);
  for (std::size_t k = 0; k < kRegionCount; ++k) out.regions[k] = downsample_mask(m.regions[k], target_h, target_w);
  return out;
}

}  // namespace snad
