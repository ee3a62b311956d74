#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace snad {

/// Raised when tensor shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (batch, channels, height, width).
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

std::ostream& operator<<(std::ostream& os, const Shape& s);

/// Dense NCHW tensor of doubles, row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor ones(Shape shape) { return Tensor(shape, 1.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }

  /// Pointer to the start of plane (n, c).
  double* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  double item() const;
  double sum() const;
  bool all_finite() const;

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Kernel geometry for 2-D convolutions (cross-correlation, no flip).
struct ConvSpec {
  std::size_t out_channels = 1;
  std::size_t in_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  bool depthwise = false;

  /// "Same" convolution with an odd square kernel.
  static ConvSpec same(std::size_t in, std::size_t out, std::size_t k = 3) {
    return ConvSpec{out, in, k, k, 1, k / 2, false};
  }
  /// Stride-2 halving convolution.
  static ConvSpec down(std::size_t in, std::size_t out, std::size_t k = 3) {
    return ConvSpec{out, in, k, k, 2, (k - 1) / 2, false};
  }

  Shape weight_shape() const {
    return Shape{out_channels, depthwise ? 1 : in_channels, kernel_h, kernel_w};
  }
  std::size_t out_extent(std::size_t in, std::size_t k) const {
    return (in + 2 * padding - k) / stride + 1;
  }
  void validate() const;
};

// Binary tensor files: "SNAD", u16 version, u16 dtype tag, 4 x u32 shape,
// little-endian float64 payload.
inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::uint16_t kDtypeFloat64 = 1;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace snad
