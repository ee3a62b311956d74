#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snad/tensor.hpp"

namespace snad {

/// Malformed or unsupported file content. offset is the byte position where
/// parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// 8-bit interleaved image with 1 (gray) or 3 (RGB) channels.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> samples;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), samples(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return samples[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return samples[(y * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Parses binary P5/P6 with maxval 255.
Image decode_netpbm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_netpbm(const Image& image);
Image read_netpbm(const std::string& path);
void write_netpbm(const Image& image, const std::string& path);

/// (1, C, H, W) tensor with values sample / 255.
Tensor image_to_tensor(const Image& image);
/// Rounds to nearest and clamps to [0, 255]. Takes batch item n.
Image tensor_to_image(const Tensor& t, std::size_t n = 0);

// ---- label maps ----------------------------------------------------------------

/// Region classes. The numeric value is the one-hot channel index.
enum class Region : std::uint8_t { kFacial = 0, kSkin = 1, kHair = 2, kBack = 3 };
inline constexpr std::size_t kRegionCount = 4;

/// Gray code used in label files: back 0, skin 85, hair 170, facial 255.
std::uint8_t region_code(Region r);
Region region_from_code(std::uint8_t code);  // throws std::invalid_argument
const char* region_name(Region r);

struct LabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Region> labels;

  LabelMap() = default;
  LabelMap(std::size_t w, std::size_t h, Region fill = Region::kBack) : width(w), height(h), labels(w * h, fill) {}

  Region& at(std::size_t x, std::size_t y) { return labels[y * width + x]; }
  Region at(std::size_t x, std::size_t y) const { return labels[y * width + x]; }
  std::array<std::size_t, kRegionCount> counts() const;
  bool operator==(const LabelMap&) const = default;
};

Image labelmap_to_image(const LabelMap& map);
/// Rejects any gray value outside the 4-value code set, naming it.
LabelMap labelmap_from_image(const Image& image);
void write_labelmap(const LabelMap& map, const std::string& path);
LabelMap read_labelmap(const std::string& path);

// ---- synthetic scenes ------------------------------------------------------------

inline constexpr std::size_t kMinSceneSize = 16;

/// Procedural face-like scene: gradient background, skin ellipse, hair cap,
/// eyes and mouth as the facial-part region.
struct SyntheticScene {
  std::uint64_t seed = 0;
  std::size_t size = 32;
  // Geometry, in units of the image size.
  double face_cx = 0.5, face_cy = 0.55, face_rx = 0.28, face_ry = 0.34;
  double hair_thickness = 0.12;
  double eye_dx = 0.11, eye_dy = -0.06, eye_r = 0.065;
  double mouth_dy = 0.17, mouth_rx = 0.12, mouth_ry = 0.05;
  // Colors (RGB in [0,1]).
  std::array<double, 3> bg_top{}, bg_bottom{}, skin{}, hair{}, eyes{}, mouth{};
  double texture_amplitude = 0.06;

  /// Draws all parameters from the seed.
  static SyntheticScene from_seed(std::uint64_t seed, std::size_t size);
};

struct LabeledImage {
  Image image;
  LabelMap labels;
};

LabeledImage render_scene(const SyntheticScene& scene);
/// Throws std::invalid_argument for size < kMinSceneSize.
LabeledImage synth_scene(std::uint64_t seed, std::size_t size);

/// Dataset layout helpers: NNNN_img.ppm / NNNN_lbl.pgm.
std::string dataset_image_name(std::size_t index);
std::string dataset_label_name(std::size_t index);

}  // namespace snad
