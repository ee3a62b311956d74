#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "snad/tensor.hpp"

namespace snad {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Odd-sized, nonnegative, unit-sum point spread function.
struct BlurKernel {
  enum class Source { kLinear, kTrajectory, kIdentity };

  std::size_t size = 1;
  std::vector<double> weights;  // row-major size x size
  Source source = Source::kIdentity;
  std::uint64_t seed = 0;       // trajectory kernels only
  double angle_degrees = 0.0;   // linear kernels only

  double at(std::size_t row, std::size_t col) const { return weights[row * size + col]; }
  double sum() const;
  /// (1, 1, size, size) tensor of the weights.
  Tensor tensor() const;
  /// Throws std::logic_error if the kernel violates its invariants.
  void check_invariants(double tol = 1e-6) const;
};

BlurKernel identity_kernel();

/// Motion blur along a straight line through the center; angle measured
/// counter-clockwise from the +x axis with y pointing down the rows. One
/// sample per pixel step, bilinearly splatted. Throws for even or < 3 sizes.
BlurKernel linear_kernel(std::size_t size, double angle_degrees);

struct TrajectoryParams {
  std::size_t steps = 64;
  double inertia = 0.7;
  /// Jitter scale as a fraction of the kernel size.
  double jitter = 0.3;
  double impulse_probability = 0.05;
  std::size_t min_size = 13;
  std::size_t max_size = 29;
};

/// Random-walk camera path in continuous 2-D coordinates.
std::vector<Point2> random_trajectory(std::uint64_t seed, std::size_t size, const TrajectoryParams& params);

/// Rasterizes a seeded random walk into a kernel whose odd side length is
/// drawn uniformly from [min_size, max_size].
BlurKernel trajectory_kernel(std::uint64_t seed, const TrajectoryParams& params = {});

/// y = clamp(x (*) k + noise, 0, 1) with edge-replicate padding and
/// N(0, sigma^2) noise from `seed`. Works per (n, c) plane.
Tensor apply_blur(const Tensor& clean, const BlurKernel& kernel, double noise_sigma, std::uint64_t seed);

/// Kernel visualization: weights scaled by 255 / max.
std::vector<std::uint8_t> kernel_to_gray(const BlurKernel& kernel);

/// Anisotropic total variation summed over all planes.
double total_variation(const Tensor& t);

}  // namespace snad
