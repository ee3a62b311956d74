#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "snad/masks.hpp"
#include "snad/tensor.hpp"

namespace snad {

/// One row of an invariant-suite report. Passing means value < threshold
/// unless the check states otherwise in its detail.
struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

std::vector<CheckResult> norm_suite(std::uint64_t seed);
std::vector<CheckResult> decomp_suite(std::uint64_t seed, std::size_t trials = 1000);
std::vector<CheckResult> grad_suite(std::uint64_t seed);
std::vector<CheckResult> spectral_suite(std::uint64_t seed);

/// "norm", "decomp", "grad", "spectral" or "all".
std::vector<CheckResult> run_suite(const std::string& name, std::uint64_t seed);
bool all_passed(const std::vector<CheckResult>& results);
void print_check_table(std::ostream& os, const std::vector<CheckResult>& results);

// ---- random inputs shared by suites, tests and benchmarks -------------------------

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
/// Random label maps, each pixel uniform over the four classes.
std::vector<LabelMap> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t h, std::size_t w);
/// Label maps with exactly half of the pixels labeled back.
std::vector<LabelMap> random_half_labels(std::mt19937_64& rng, std::size_t n, std::size_t h, std::size_t w);

/// Batch whose foreground and background hold exactly standardized samples
/// shifted to means gap/2 and -gap/2 per channel, plus a distinct offset per
/// image. Masks must split each image in half.
Tensor two_region_batch(std::mt19937_64& rng, const RegionMasks& masks, std::size_t channels, double min_gap);

}  // namespace snad
