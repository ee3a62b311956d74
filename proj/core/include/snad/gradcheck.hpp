#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include "snad/autodiff.hpp"

namespace snad {

/// Builds a scalar on the given tape from the probe variable.
using ScalarFn = std::function<Var(Tape&, const Var&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t probes = 0;
  /// Probes skipped because f has a slope discontinuity within the step.
  std::size_t kinks = 0;
  /// Set when f was non-finite at some probe; names the coordinate.
  std::optional<std::size_t> nonfinite_index;

  bool ok(double tol) const { return !nonfinite_index && max_rel_error < tol; }
};

/// Compares the tape gradient of f at `point` with central differences.
/// Error per coordinate is |analytic - numeric| / max(1, |numeric|).
/// With max_probes > 0 only that many coordinates (chosen by `seed`) are probed.
GradCheckResult check_gradient(const ScalarFn& f, const Tensor& point, double step = 1e-5,
                               std::size_t max_probes = 0, std::uint64_t seed = 0);

/// Same check against a parameter: f is re-run with the parameter's value
/// perturbed in place (restored afterwards). With skip_kinks, a mismatching
/// probe whose one-sided slopes still disagree at half the step is counted in
/// `kinks` and left out of the error.
using ModelFn = std::function<Var(Tape&)>;
GradCheckResult check_parameter_gradient(const ModelFn& f, Parameter& param, double step = 1e-5,
                                         std::size_t max_probes = 0, std::uint64_t seed = 0, bool skip_kinks = false);

}  // namespace snad
