#pragma once

#include "snad/tensor.hpp"

// Raw (non-recording) convolution kernels shared by the autodiff ops and by
// fixed-filter code paths.
namespace snad::kernels {

struct Geometry {
  std::size_t channels, in_h, in_w, k_h, k_w, stride, pad, out_h, out_w;
};

/// Unfolds one (C,H,W) sample into a (C*kh*kw) x (out_h*out_w) row-major matrix.
void im2col(const double* src, const Geometry& g, double* cols);
/// Adjoint of im2col: scatters-adds columns back into a (C,H,W) sample.
void col2im(const double* cols, const Geometry& g, double* dst);

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvSpec& spec);
void conv2d_backward(const Tensor& x, const Tensor& w, const ConvSpec& spec, const Tensor& gy,
                     Tensor* gx, Tensor* gw, Tensor* gb);

Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                                std::size_t pad);
void conv_transpose2d_backward(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad,
                               const Tensor& gy, Tensor* gx, Tensor* gw, Tensor* gb);

}  // namespace snad::kernels
