#include "snad/blur.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace snad {

double BlurKernel::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Tensor BlurKernel::tensor() const { return Tensor(Shape{1, 1, size, size}, weights); }

void BlurKernel::check_invariants(double tol) const {
  if (size % 2 == 0) throw std::logic_error("blur kernel: even side length " + std::to_string(size));
  if (weights.size() != size * size) throw std::logic_error("blur kernel: weight count mismatch");
  for (double w : weights)
    if (!(w >= 0.0)) throw std::logic_error("blur kernel: negative or NaN weight");
  if (std::abs(sum() - 1.0) > tol) throw std::logic_error("blur kernel: weights sum to " + std::to_string(sum()));
}

BlurKernel identity_kernel() { return BlurKernel{1, {1.0}, BlurKernel::Source::kIdentity, 0, 0.0}; }

namespace {

void splat(std::vector<double>& grid, std::size_t size, double x, double y, double mass) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const double w[2][2] = {{(1 - ax) * (1 - ay), ax * (1 - ay)}, {(1 - ax) * ay, ax * ay}};
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      const long xx = x0 + dx, yy = y0 + dy;
      if (w[dy][dx] == 0.0) continue;
      if (xx < 0 || yy < 0 || xx >= static_cast<long>(size) || yy >= static_cast<long>(size)) continue;
      grid[static_cast<std::size_t>(yy) * size + static_cast<std::size_t>(xx)] += mass * w[dy][dx];
    }
}

void normalize(std::vector<double>& grid) {
  double s = 0.0;
  for (double v : grid) s += v;
  if (!(s > 0.0)) throw std::logic_error("blur kernel: no mass after rasterization");
  for (double& v : grid) v /= s;
}

}  // namespace

BlurKernel linear_kernel(std::size_t size, double angle_degrees) {
  if (size < 3 || size % 2 == 0)
    throw std::invalid_argument("linear_kernel: size must be odd and >= 3, got " + std::to_string(size));
  const double theta = angle_degrees * std::numbers::pi / 180.0;
  const double c = static_cast<double>(size - 1) / 2.0;
  std::vector<double> grid(size * size, 0.0);
  for (std::size_t k = 0; k < size; ++k) {
    const double t = -c + static_cast<double>(k);
    splat(grid, size, c + t * std::cos(theta), c - t * std::sin(theta), 1.0);
  }
  normalize(grid);
  return BlurKernel{size, std::move(grid), BlurKernel::Source::kLinear, 0, angle_degrees};
}

std::vector<Point2> random_trajectory(std::uint64_t seed, std::size_t size, const TrajectoryParams& p) {
  if (p.steps < 1) throw std::invalid_argument("random_trajectory: need at least one step");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double base = static_cast<double>(size) / static_cast<double>(p.steps);
  const double jitter = p.jitter * static_cast<double>(size) / static_cast<double>(p.steps);
  double angle = 2.0 * std::numbers::pi * uni(rng);
  Point2 v{base * std::cos(angle), base * std::sin(angle)};
  std::vector<Point2> pts{{0.0, 0.0}};
  for (std::size_t i = 0; i < p.steps; ++i) {
    if (uni(rng) < p.impulse_probability) {
      angle = 2.0 * std::numbers::pi * uni(rng);
      const double speed = std::hypot(v.x, v.y) + base;
      v = {speed * std::cos(angle), speed * std::sin(angle)};
    } else {
      angle = 2.0 * std::numbers::pi * uni(rng);
      v.x = p.inertia * v.x + (1.0 - p.inertia) * base * std::cos(angle) + jitter * gauss(rng);
      v.y = p.inertia * v.y + (1.0 - p.inertia) * base * std::sin(angle) + jitter * gauss(rng);
    }
    pts.push_back({pts.back().x + v.x, pts.back().y + v.y});
  }
  return pts;
}

BlurKernel trajectory_kernel(std::uint64_t seed, const TrajectoryParams& p) {
  if (p.min_size > p.max_size || p.max_size < 1)
    throw std::invalid_argument("trajectory_kernel: invalid size range");
  std::mt19937_64 rng(seed ^ 0x7F4A7C15F39CC060ull);
  const std::size_t lo = p.min_size | 1u;  // smallest odd >= min
  const std::size_t hi = (p.max_size % 2 == 1) ? p.max_size : p.max_size - 1;
  if (lo > hi) throw std::invalid_argument("trajectory_kernel: size range holds no odd value");
  const std::size_t size = lo + 2 * std::uniform_int_distribution<std::size_t>(0, (hi - lo) / 2)(rng);

  auto pts = random_trajectory(seed, size, p);
  double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
  for (const Point2& q : pts) {
    minx = std::min(minx, q.x);
    maxx = std::max(maxx, q.x);
    miny = std::min(miny, q.y);
    maxy = std::max(maxy, q.y);
  }
  // Fit the path inside the grid, leaving a one-pixel margin.
  const double room = std::max(1.0, static_cast<double>(size) - 3.0);
  const double extent = std::max(maxx - minx, maxy - miny);
  const double s = extent > room ? room / extent : 1.0;
  const double center = static_cast<double>(size - 1) / 2.0;
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  for (Point2& q : pts) q = {center + (q.x - cx) * s, center + (q.y - cy) * s};

  std::vector<double> grid(size * size, 0.0);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2 a = pts[i], b = pts[i + 1];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / 0.25)));
    // Mass proportional to the time spent on the segment.
    for (std::size_t k = 0; k < sub; ++k) {
      const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(sub);
      splat(grid, size, a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), 1.0 / static_cast<double>(sub));
    }
  }
  normalize(grid);
  BlurKernel k{size, std::move(grid), BlurKernel::Source::kTrajectory, seed, 0.0};
  k.check_invariants();
  return k;
}

Tensor apply_blur(const Tensor& clean, const BlurKernel& kernel, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw std::invalid_argument("apply_blur: negative noise sigma");
  kernel.check_invariants();
  const Shape& s = clean.shape();
  const long r = static_cast<long>(kernel.size / 2);
  const long h = static_cast<long>(s.h), w = static_cast<long>(s.w);
  Tensor out(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = clean.plane(n, c);
      double* dst = out.plane(n, c);
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          double acc = 0.0;
          for (long i = -r; i <= r; ++i) {
            const long yy = std::clamp(y + i, 0L, h - 1);
            for (long j = -r; j <= r; ++j) {
              const long xx = std::clamp(x + j, 0L, w - 1);
              acc += kernel.weights[static_cast<std::size_t>((i + r) * (2 * r + 1) + (j + r))] * src[yy * w + xx];
            }
          }
          if (noise_sigma > 0.0) acc += gauss(rng);
          dst[y * w + x] = std::clamp(acc, 0.0, 1.0);
        }
    }
  return out;
}

std::vector<std::uint8_t> kernel_to_gray(const BlurKernel& kernel) {
  const double mx = *std::max_element(kernel.weights.begin(), kernel.weights.end());
  std::vector<std::uint8_t> out(kernel.weights.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(mx > 0 ? 255.0 * kernel.weights[i] / mx : 0.0));
  return out;
}

double total_variation(const Tensor& t) {
  const Shape& s = t.shape();
  double tv = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = t.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          if (x + 1 < s.w) tv += std::abs(p[y * s.w + x + 1] - p[y * s.w + x]);
          if (y + 1 < s.h) tv += std::abs(p[(y + 1) * s.w + x] - p[y * s.w + x]);
        }
    }
  return tv;
}

}  // namespace snad
