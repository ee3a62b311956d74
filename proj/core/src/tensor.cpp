#include "snad/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace snad {

std::string Shape::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '(' << s.n << 'x' << s.c << 'x' << s.h << 'x' << s.w << ')';
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != numel())
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  return Tensor(shape, data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void ConvSpec::validate() const {
  if (out_channels == 0 || in_channels == 0) throw ShapeError("conv: zero channel count");
  if (kernel_h == 0 || kernel_w == 0) throw ShapeError("conv: zero kernel extent");
  if (stride == 0) throw ShapeError("conv: stride must be >= 1");
  // Even kernels are only meaningful for strided (downsampling) convolutions.
  if (stride == 1 && (kernel_h % 2 == 0 || kernel_w % 2 == 0))
    throw ShapeError("conv: kernel extents must be odd for stride 1, got " + std::to_string(kernel_h) +
                     "x" + std::to_string(kernel_w));
  if (depthwise && out_channels != in_channels)
    throw ShapeError("conv: depthwise requires out_channels == in_channels");
}

namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* field) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw std::runtime_error(std::string("tensor file truncated while reading ") + field);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("SNAD", 4);
  put<std::uint16_t>(os, kTensorFileVersion);
  put<std::uint16_t>(os, kDtypeFloat64);
  const Shape& s = t.shape();
  for (std::size_t d : {s.n, s.c, s.h, s.w}) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SNAD", 4) != 0)
    throw std::runtime_error("not a tensor file (bad magic)");
  auto version = get<std::uint16_t>(is, "version");
  if (version != kTensorFileVersion)
    throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
  auto dtype = get<std::uint16_t>(is, "dtype");
  if (dtype != kDtypeFloat64) throw std::runtime_error("unsupported dtype tag " + std::to_string(dtype));
  Shape s;
  s.n = get<std::uint32_t>(is, "shape");
  s.c = get<std::uint32_t>(is, "shape");
  s.h = get<std::uint32_t>(is, "shape");
  s.w = get<std::uint32_t>(is, "shape");
  std::vector<double> data(s.numel());
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
    throw std::runtime_error("tensor file truncated in payload");
  return Tensor(s, std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_tensor(os, t);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_tensor(is);
}

}  // namespace snad
