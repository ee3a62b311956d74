#include "snad/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace snad {

// ---- netpbm ----------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {});
}

void spit(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

Image decode_netpbm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("netpbm: missing magic", 0);
  std::size_t channels;
  if (bytes[1] == '5')
    channels = 1;
  else if (bytes[1] == '6')
    channels = 3;
  else
    throw FormatError("netpbm: unsupported magic P" + std::string(1, static_cast<char>(bytes[1])) +
                          " (only binary P5/P6)",
                      1);
  std::size_t pos = 2;
  auto skip = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* field) {
    skip();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw FormatError(std::string("netpbm: ") + field + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("netpbm: expected ") + field, start);
    return std::pair{v, start};
  };
  if (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
    throw FormatError("netpbm: expected whitespace after magic", pos);
  auto [width, wpos] = number("width");
  auto [height, hpos] = number("height");
  auto [maxval, mpos] = number("maxval");
  if (width == 0) throw FormatError("netpbm: zero width", wpos);
  if (height == 0) throw FormatError("netpbm: zero height", hpos);
  if (maxval != 255) throw FormatError("netpbm: unsupported maxval " + std::to_string(maxval) + " (need 255)", mpos);
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("netpbm: missing whitespace after maxval", pos);
  ++pos;

  Image img(width, height, channels);
  const std::size_t need = img.samples.size();
  if (bytes.size() - pos < need)
    throw FormatError("netpbm: truncated raster, need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - pos),
                      bytes.size());
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.samples.begin());
  return img;
}

std::vector<std::uint8_t> encode_netpbm(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("netpbm: channels must be 1 or 3, got " + std::to_string(image.channels));
  if (image.samples.size() != image.width * image.height * image.channels)
    throw std::invalid_argument("netpbm: sample buffer does not match dimensions");
  std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) + " " +
                       std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.samples.begin(), image.samples.end());
  return out;
}

Image read_netpbm(const std::string& path) { return decode_netpbm(slurp(path)); }

void write_netpbm(const Image& image, const std::string& path) { spit(path, encode_netpbm(image)); }

Tensor image_to_tensor(const Image& image) {
  Tensor t(Shape{1, image.channels, image.height, image.width});
  for (std::size_t c = 0; c < image.channels; ++c)
    for (std::size_t y = 0; y < image.height; ++y)
      for (std::size_t x = 0; x < image.width; ++x) t.at(0, c, y, x) = image.at(x, y, c) / 255.0;
  return t;
}

Image tensor_to_image(const Tensor& t, std::size_t n) {
  const Shape& s = t.shape();
  if (s.c != 1 && s.c != 3) throw ShapeError("tensor_to_image: need 1 or 3 channels, got " + s.str());
  if (n >= s.n) throw ShapeError("tensor_to_image: batch index out of range");
  Image img(s.w, s.h, s.c);
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        double v = std::clamp(t.at(n, c, y, x), 0.0, 1.0);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return img;
}

// ---- label maps --------------------------------------------------------------------

std::uint8_t region_code(Region r) {
  switch (r) {
    case Region::kBack: return 0;
    case Region::kSkin: return 85;
    case Region::kHair: return 170;
    case Region::kFacial: return 255;
  }
  throw std::invalid_argument("invalid region");
}

Region region_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return Region::kBack;
    case 85: return Region::kSkin;
    case 170: return Region::kHair;
    case 255: return Region::kFacial;
    default: throw std::invalid_argument("invalid label code " + std::to_string(code) + " (expected 0, 85, 170, 255)");
  }
}

const char* region_name(Region r) {
  switch (r) {
    case Region::kFacial: return "facial";
    case Region::kSkin: return "skin";
    case Region::kHair: return "hair";
    case Region::kBack: return "back";
  }
  return "?";
}

std::array<std::size_t, kRegionCount> LabelMap::counts() const {
  std::array<std::size_t, kRegionCount> c{};
  for (Region r : labels) ++c[static_cast<std::size_t>(r)];
  return c;
}

Image labelmap_to_image(const LabelMap& map) {
  Image img(map.width, map.height, 1);
  for (std::size_t i = 0; i < map.labels.size(); ++i) img.samples[i] = region_code(map.labels[i]);
  return img;
}

LabelMap labelmap_from_image(const Image& image) {
  if (image.channels != 1) throw std::invalid_argument("label map must be single-channel (P5)");
  LabelMap map(image.width, image.height);
  for (std::size_t i = 0; i < image.samples.size(); ++i) {
    try {
      map.labels[i] = region_from_code(image.samples[i]);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("label map: invalid value " + std::to_string(image.samples[i]) + " at pixel (" +
                                  std::to_string(i % image.width) + ", " + std::to_string(i / image.width) + ")");
    }
  }
  return map;
}

void write_labelmap(const LabelMap& map, const std::string& path) { write_netpbm(labelmap_to_image(map), path); }

LabelMap read_labelmap(const std::string& path) { return labelmap_from_image(read_netpbm(path)); }

// ---- synthetic scenes ----------------------------------------------------------------

SyntheticScene SyntheticScene::from_seed(std::uint64_t seed, std::size_t size) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 0x5eedull);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SyntheticScene s;
  s.seed = seed;
  s.size = size;
  s.face_cx = uni(0.45, 0.55);
  s.face_cy = uni(0.52, 0.60);
  s.face_rx = uni(0.25, 0.31);
  s.face_ry = uni(0.31, 0.37);
  s.hair_thickness = uni(0.10, 0.15);
  s.eye_dx = uni(0.10, 0.13);
  s.eye_dy = uni(-0.09, -0.04);
  s.eye_r = uni(0.065, 0.08);
  s.mouth_dy = uni(0.15, 0.19);
  s.mouth_rx = uni(0.10, 0.14);
  s.mouth_ry = uni(0.05, 0.065);
  auto color = [&](double lo, double hi) { return std::array<double, 3>{uni(lo, hi), uni(lo, hi), uni(lo, hi)}; };
  s.bg_top = color(0.2, 0.9);
  s.bg_bottom = color(0.1, 0.8);
  s.skin = {uni(0.65, 0.95), uni(0.45, 0.75), uni(0.35, 0.6)};
  s.hair = color(0.05, 0.35);
  s.eyes = color(0.0, 0.2);
  s.mouth = {uni(0.55, 0.85), uni(0.1, 0.3), uni(0.15, 0.35)};
  s.texture_amplitude = uni(0.03, 0.08);
  return s;
}

LabeledImage render_scene(const SyntheticScene& s) {
  const std::size_t n = s.size;
  LabeledImage out{Image(n, n, 3), LabelMap(n, n)};
  std::mt19937_64 rng(s.seed ^ 0xA5A5A5A5ull);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double inv = 1.0 / static_cast<double>(n);
  auto inside = [](double x, double y, double cx, double cy, double rx, double ry) {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  };
  for (std::size_t py = 0; py < n; ++py)
    for (std::size_t px = 0; px < n; ++px) {
      const double x = (static_cast<double>(px) + 0.5) * inv;
      const double y = (static_cast<double>(py) + 0.5) * inv;
      Region r = Region::kBack;
      std::array<double, 3> rgb;
      for (int c = 0; c < 3; ++c) rgb[static_cast<std::size_t>(c)] = s.bg_top[c] * (1.0 - y) + s.bg_bottom[c] * y;
      double tex = 0.5 * std::sin(6.0 * 3.14159265 * (x + 0.5 * y));

      const bool in_face = inside(x, y, s.face_cx, s.face_cy, s.face_rx, s.face_ry);
      const bool in_cap = inside(x, y, s.face_cx, s.face_cy, s.face_rx + s.hair_thickness,
                                 s.face_ry + s.hair_thickness) &&
                          y < s.face_cy - 0.1 * s.face_ry;
      if (in_face) {
        r = Region::kSkin;
        const double shade = 1.0 - 0.25 * std::abs(x - s.face_cx) / s.face_rx;
        for (std::size_t c = 0; c < 3; ++c) rgb[c] = s.skin[c] * shade;
        tex = 0.3 * std::sin(14.0 * 3.14159265 * y);
        const double eye_y = s.face_cy + s.eye_dy;
        const bool eye = inside(x, y, s.face_cx - s.eye_dx, eye_y, s.eye_r, s.eye_r) ||
                         inside(x, y, s.face_cx + s.eye_dx, eye_y, s.eye_r, s.eye_r);
        const bool mouth = inside(x, y, s.face_cx, s.face_cy + s.mouth_dy, s.mouth_rx, s.mouth_ry);
        if (eye) {
          r = Region::kFacial;
          rgb = s.eyes;
          tex = 0.0;
        } else if (mouth) {
          r = Region::kFacial;
          rgb = s.mouth;
          tex = 0.2;
        }
      } else if (in_cap) {
        r = Region::kHair;
        rgb = s.hair;
        // Strands.
        tex = std::sin(40.0 * x + 8.0 * y) > 0.3 ? 1.0 : -0.5;
      }
      out.labels.at(px, py) = r;
      for (std::size_t c = 0; c < 3; ++c) {
        double v = rgb[c] + s.texture_amplitude * (tex + 0.3 * noise(rng));
        out.image.at(px, py, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  return out;
}

LabeledImage synth_scene(std::uint64_t seed, std::size_t size) {
  if (size < kMinSceneSize)
    throw std::invalid_argument("synth_scene: size " + std::to_string(size) + " below minimum " +
                                std::to_string(kMinSceneSize));
  return render_scene(SyntheticScene::from_seed(seed, size));
}

std::string dataset_image_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu_img.ppm", index);
  return buf;
}

std::string dataset_label_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu_lbl.pgm", index);
  return buf;
}

}  // namespace snad
