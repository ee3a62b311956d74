#pragma once

// Direct-loop reference implementations used to cross-check the library.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "snad/tensor.hpp"

namespace snad::testing {

inline Tensor random_uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Cross-correlation with zero padding, one output element at a time.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, std::size_t pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const std::size_t oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const std::size_t ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Tensor out(Shape{xs.n, ws.n, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = bias ? (*bias)[o] : 0.0;
          for (std::size_t c = 0; c < ws.c; ++c)
            for (std::size_t ky = 0; ky < ws.h; ++ky)
              for (std::size_t kx = 0; kx < ws.w; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(xs.h) || ix >= static_cast<long>(xs.w)) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          out.at(n, o, y, xo) = acc;
        }
  return out;
}

// Transposed convolution by scattering every input element; weight (in, out, k, k).
inline Tensor naive_conv_transpose(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const long k = static_cast<long>(ws.h);
  const long oh = static_cast<long>((xs.h - 1) * stride + ws.h) - 2 * static_cast<long>(pad);
  const long ow = static_cast<long>((xs.w - 1) * stride + ws.w) - 2 * static_cast<long>(pad);
  Tensor out(Shape{xs.n, ws.c, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t i = 0; i < xs.c; ++i)
      for (std::size_t y = 0; y < xs.h; ++y)
        for (std::size_t xi = 0; xi < xs.w; ++xi)
          for (std::size_t o = 0; o < ws.c; ++o)
            for (long ky = 0; ky < k; ++ky)
              for (long kx = 0; kx < k; ++kx) {
                const long oy = static_cast<long>(y * stride) + ky - static_cast<long>(pad);
                const long ox = static_cast<long>(xi * stride) + kx - static_cast<long>(pad);
                if (oy < 0 || ox < 0 || oy >= oh || ox >= ow) continue;
                out.at(n, o, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) +=
                    x.at(n, i, y, xi) * w.at(i, o, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx));
              }
  return out;
}

// Mean and biased variance of the entries of one plane selected by mask.
struct Moments {
  double mean = 0.0, var = 0.0;
  std::size_t count = 0;
};

inline Moments plane_moments(const Tensor& t, std::size_t n, std::size_t c, const Tensor& mask) {
  Moments m;
  const std::size_t hw = t.shape().plane();
  for (std::size_t i = 0; i < hw; ++i)
    if (mask[n * hw + i] != 0.0) {
      m.mean += t.plane(n, c)[i];
      ++m.count;
    }
  if (m.count == 0) return m;
  m.mean /= static_cast<double>(m.count);
  for (std::size_t i = 0; i < hw; ++i)
    if (mask[n * hw + i] != 0.0) m.var += std::pow(t.plane(n, c)[i] - m.mean, 2);
  m.var /= static_cast<double>(m.count);
  return m;
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// sqrt of the top eigenvalue of W^T W by many plain power steps.
inline double oracle_top_sv(const Tensor& w) {
  const std::size_t rows = w.shape().n, cols = w.numel() / rows;
  std::vector<double> v(cols, 1.0), wv(rows), next(cols);
  for (std::size_t c = 0; c < cols; ++c) v[c] = 1.0 + 0.01 * static_cast<double>(c % 7);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * v[c];
      wv[r] = s;
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += w[r * cols + c] * wv[r];
      next[c] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;
    for (std::size_t c = 0; c < cols; ++c) v[c] = next[c] / norm;
  }
  return std::sqrt(lambda);
}

}  // namespace snad::testing
