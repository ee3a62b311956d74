#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "snad/autodiff.hpp"

namespace snad {

/// Seeded source for parameter initialization.
class InitRng {
 public:
  explicit InitRng(std::uint64_t seed) : engine_(seed) {}
  double normal(double stddev) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  Tensor normal_tensor(Shape shape, double stddev);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

enum class Init { kHe, kZero };

/// Convolution with bias, parameters registered as "<name>.weight" and
/// "<name>.bias".
struct ConvLayer {
  ConvSpec spec;
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static ConvLayer create(ParameterSet& params, const std::string& name, const ConvSpec& spec, InitRng& rng,
                          Init init = Init::kHe, double gain = 1.0);
  Var operator()(Tape& tape, const Var& x) const;
};

/// Transposed convolution, weight (in, out, k, k).
struct ConvTransposeLayer {
  std::size_t in_channels = 0, out_channels = 0, kernel = 4, stride = 2, padding = 1;
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static ConvTransposeLayer create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                   InitRng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

}  // namespace snad
