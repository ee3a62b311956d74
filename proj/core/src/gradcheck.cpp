#include "snad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace snad {

namespace {

constexpr double kKinkScreen = 1e-6;

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_probes, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (max_probes == 0 || max_probes >= n) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; the first max_probes entries are the sample.
  for (std::size_t i = 0; i < max_probes; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_probes);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename Eval>
GradCheckResult compare(const Tensor& analytic, Tensor& point, Eval eval, double step, std::size_t max_probes,
                        std::uint64_t seed, bool skip_kinks) {
  GradCheckResult r;
  for (std::size_t i : probe_indices(point.numel(), max_probes, seed)) {
    const double saved = point[i];
    point[i] = saved + step;
    const double fp = eval();
    point[i] = saved - step;
    const double fm = eval();
    point[i] = saved;
    ++r.probes;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      r.nonfinite_index = i;
      return r;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (skip_kinks && err > kKinkScreen) {
      // Jump between one-sided slopes: halves with the step when f is smooth,
      // persists when a slope discontinuity sits within step/2, vanishes when
      // it sits between step/2 and step.
      const double f0 = eval();
      point[i] = saved + step / 2;
      const double fp2 = eval();
      point[i] = saved - step / 2;
      const double fm2 = eval();
      point[i] = saved;
      const double jump = std::abs((fp - f0) - (f0 - fm)) / step;
      const double jump2 = std::abs((fp2 - f0) - (f0 - fm2)) / (step / 2);
      if (jump2 > 0.75 * jump) {
        ++r.kinks;
        continue;
      }
      if (jump2 < 0.25 * jump) {
        const double numeric2 = (fp2 - fm2) / step;
        err = std::abs(analytic[i] - numeric2) / std::max(1.0, std::abs(numeric2));
      }
    }
    if (r.probes == 1 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace

GradCheckResult check_gradient(const ScalarFn& f, const Tensor& point, double step, std::size_t max_probes,
                               std::uint64_t seed) {
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.input(point);
    Var y = f(tape, x);
    if (!std::isfinite(y.value().item())) {
      GradCheckResult r;
      r.nonfinite_index = 0;
      return r;
    }
    tape.backward(y);
    analytic = tape.grad(x);
  }
  Tensor probe = point;
  auto eval = [&] {
    Tape tape;
    Var x = tape.constant(probe);
    return f(tape, x).value().item();
  };
  return compare(analytic, probe, eval, step, max_probes, seed, false);
}

GradCheckResult check_parameter_gradient(const ModelFn& f, Parameter& param, double step, std::size_t max_probes,
                                         std::uint64_t seed, bool skip_kinks) {
  Tensor analytic;
  {
    Tape tape;
    Var p = tape.param(param);
    Var y = f(tape);
    tape.backward(y);
    analytic = tape.grad(p);
  }
  auto eval = [&] {
    Tape tape;
    return f(tape).value().item();
  };
  return compare(analytic, param.value, eval, step, max_probes, seed, skip_kinks);
}

}  // namespace snad
