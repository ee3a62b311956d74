#include "conv_kernels.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace snad::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void check_conv_shapes(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvSpec& spec) {
  spec.validate();
  const Shape& xs = x.shape();
  if (xs.c != spec.in_channels)
    throw ShapeError("conv2d: input channels " + std::to_string(xs.c) + " != spec in_channels " +
                     std::to_string(spec.in_channels));
  if (w.shape() != spec.weight_shape())
    throw ShapeError("conv2d: weight shape " + w.shape().str() + " != expected " +
                     spec.weight_shape().str());
  if (bias && bias->numel() != spec.out_channels)
    throw ShapeError("conv2d: bias length " + std::to_string(bias->numel()) + " != out_channels " +
                     std::to_string(spec.out_channels));
  if (xs.h + 2 * spec.padding < spec.kernel_h)
    throw ShapeError("conv2d: input height " + std::to_string(xs.h) + " smaller than kernel");
  if (xs.w + 2 * spec.padding < spec.kernel_w)
    throw ShapeError("conv2d: input width " + std::to_string(xs.w) + " smaller than kernel");
}

Geometry geometry_for(const Shape& xs, const ConvSpec& spec, std::size_t channels) {
  return Geometry{channels,    xs.h,         xs.w,
                  spec.kernel_h, spec.kernel_w, spec.stride,
                  spec.padding, spec.out_extent(xs.h, spec.kernel_h), spec.out_extent(xs.w, spec.kernel_w)};
}

// Depthwise path: one kernel per channel, direct loops.
Tensor depthwise_forward(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvSpec& spec) {
  const Shape& xs = x.shape();
  Geometry g = geometry_for(xs, spec, 1);
  Tensor y(Shape{xs.n, xs.c, g.out_h, g.out_w});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const double* src = x.plane(n, c);
      const double* k = w.plane(c, 0);
      double* dst = y.plane(n, c);
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double acc = bias ? (*bias)[c] : 0.0;
          for (std::size_t ky = 0; ky < g.k_h; ++ky) {
            long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
            for (std::size_t kx = 0; kx < g.k_w; ++kx) {
              long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
              acc += k[ky * g.k_w + kx] * src[iy * g.in_w + ix];
            }
          }
          dst[oy * g.out_w + ox] = acc;
        }
    }
  return y;
}

void depthwise_backward(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& gy, Tensor* gx,
                        Tensor* gw, Tensor* gb) {
  const Shape& xs = x.shape();
  Geometry g = geometry_for(xs, spec, 1);
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const double* src = x.plane(n, c);
      const double* k = w.plane(c, 0);
      const double* dy = gy.plane(n, c);
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double d = dy[oy * g.out_w + ox];
          if (gb) (*gb)[c] += d;
          for (std::size_t ky = 0; ky < g.k_h; ++ky) {
            long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
            for (std::size_t kx = 0; kx < g.k_w; ++kx) {
              long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
              if (gx) gx->plane(n, c)[iy * g.in_w + ix] += k[ky * g.k_w + kx] * d;
              if (gw) gw->plane(c, 0)[ky * g.k_w + kx] += src[iy * g.in_w + ix] * d;
            }
          }
        }
    }
}

}  // namespace

void im2col(const double* src, const Geometry& g, double* cols) {
  const std::size_t positions = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.k_h; ++ky)
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * positions;
        const double* plane = src + c * g.in_h * g.in_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          double* out = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            for (std::size_t ox = 0; ox < g.out_w; ++ox) out[ox] = 0.0;
            continue;
          }
          const double* line = plane + iy * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            out[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? 0.0 : line[ix];
          }
        }
      }
}

void col2im(const double* cols, const Geometry& g, double* dst) {
  const std::size_t positions = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.k_h; ++ky)
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * positions;
        double* plane = dst + c * g.in_h * g.in_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          const double* in = row + oy * g.out_w;
          double* line = plane + iy * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.in_w)) line[ix] += in[ox];
          }
        }
      }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvSpec& spec) {
  check_conv_shapes(x, w, bias, spec);
  if (spec.depthwise) return depthwise_forward(x, w, bias, spec);

  const Shape& xs = x.shape();
  Geometry g = geometry_for(xs, spec, xs.c);
  const std::size_t k = xs.c * g.k_h * g.k_w;
  const std::size_t p = g.out_h * g.out_w;
  Tensor y(Shape{xs.n, spec.out_channels, g.out_h, g.out_w});
  std::vector<double> cols(k * p);
  CMapMat wm(w.data().data(), static_cast<long>(spec.out_channels), static_cast<long>(k));
  for (std::size_t n = 0; n < xs.n; ++n) {
    im2col(x.plane(n, 0), g, cols.data());
    MapMat ym(y.plane(n, 0), static_cast<long>(spec.out_channels), static_cast<long>(p));
    ym.noalias() = wm * CMapMat(cols.data(), static_cast<long>(k), static_cast<long>(p));
    if (bias)
      for (std::size_t o = 0; o < spec.out_channels; ++o) ym.row(static_cast<long>(o)).array() += (*bias)[o];
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& gy, Tensor* gx,
                     Tensor* gw, Tensor* gb) {
  if (spec.depthwise) {
    depthwise_backward(x, w, spec, gy, gx, gw, gb);
    return;
  }
  const Shape& xs = x.shape();
  Geometry g = geometry_for(xs, spec, xs.c);
  const long k = static_cast<long>(xs.c * g.k_h * g.k_w);
  const long p = static_cast<long>(g.out_h * g.out_w);
  const long o = static_cast<long>(spec.out_channels);
  std::vector<double> cols(static_cast<std::size_t>(k * p));
  CMapMat wm(w.data().data(), o, k);
  for (std::size_t n = 0; n < xs.n; ++n) {
    CMapMat dy(gy.plane(n, 0), o, p);
    if (gb)
      for (long oc = 0; oc < o; ++oc) (*gb)[static_cast<std::size_t>(oc)] += dy.row(oc).sum();
    if (gw) {
      im2col(x.plane(n, 0), g, cols.data());
      MapMat gwm(gw->data().data(), o, k);
      gwm.noalias() += dy * CMapMat(cols.data(), k, p).transpose();
    }
    if (gx) {
      MapMat cm(cols.data(), k, p);
      cm.noalias() = wm.transpose() * dy;
      col2im(cols.data(), g, gx->plane(n, 0));
    }
  }
}

// The transposed convolution is the adjoint of a strided convolution that
// maps the (larger) output grid onto the input grid.
Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                                std::size_t pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.n != xs.c)
    throw ShapeError("conv_transpose2d: weight in-channels " + std::to_string(ws.n) + " != input channels " +
                     std::to_string(xs.c));
  if (bias && bias->numel() != ws.c)
    throw ShapeError("conv_transpose2d: bias length mismatch");
  if (stride == 0) throw ShapeError("conv_transpose2d: stride must be >= 1");
  const std::size_t oh = (xs.h - 1) * stride + ws.h - 2 * pad;
  const std::size_t ow = (xs.w - 1) * stride + ws.w - 2 * pad;
  Geometry g{ws.c, oh, ow, ws.h, ws.w, stride, pad, xs.h, xs.w};
  const long k = static_cast<long>(ws.c * ws.h * ws.w);
  const long p = static_cast<long>(xs.h * xs.w);
  const long ci = static_cast<long>(xs.c);
  Tensor y(Shape{xs.n, ws.c, oh, ow});
  std::vector<double> cols(static_cast<std::size_t>(k * p));
  CMapMat wm(w.data().data(), ci, k);
  for (std::size_t n = 0; n < xs.n; ++n) {
    MapMat cm(cols.data(), k, p);
    cm.noalias() = wm.transpose() * CMapMat(x.plane(n, 0), ci, p);
    col2im(cols.data(), g, y.plane(n, 0));
    if (bias)
      for (std::size_t c = 0; c < ws.c; ++c) {
        double* pl = y.plane(n, c);
        for (std::size_t i = 0; i < oh * ow; ++i) pl[i] += (*bias)[c];
      }
  }
  return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad,
                               const Tensor& gy, Tensor* gx, Tensor* gw, Tensor* gb) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const Shape& ys = gy.shape();
  Geometry g{ws.c, ys.h, ys.w, ws.h, ws.w, stride, pad, xs.h, xs.w};
  const long k = static_cast<long>(ws.c * ws.h * ws.w);
  const long p = static_cast<long>(xs.h * xs.w);
  const long ci = static_cast<long>(xs.c);
  std::vector<double> cols(static_cast<std::size_t>(k * p));
  CMapMat wm(w.data().data(), ci, k);
  for (std::size_t n = 0; n < xs.n; ++n) {
    if (gb)
      for (std::size_t c = 0; c < ws.c; ++c) {
        const double* pl = gy.plane(n, c);
        double s = 0.0;
        for (std::size_t i = 0; i < ys.h * ys.w; ++i) s += pl[i];
        (*gb)[c] += s;
      }
    if (!gx && !gw) continue;
    im2col(gy.plane(n, 0), g, cols.data());
    CMapMat cm(cols.data(), k, p);
    if (gx) {
      MapMat gxm(gx->plane(n, 0), ci, p);
      gxm.noalias() += wm * cm;
    }
    if (gw) {
      MapMat gwm(gw->data().data(), ci, k);
      gwm.noalias() += CMapMat(x.plane(n, 0), ci, p) * cm.transpose();
    }
  }
}

}  // namespace snad::kernels
