#include "snad/layers.hpp"

#include <cmath>

namespace snad {

Tensor InitRng::normal_tensor(Shape shape, double stddev) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = normal(stddev);
  return t;
}

ConvLayer ConvLayer::create(ParameterSet& params, const std::string& name, const ConvSpec& spec, InitRng& rng,
                            Init init, double gain) {
  spec.validate();
  const Shape ws = spec.weight_shape();
  const double fan_in = static_cast<double>(ws.c * ws.h * ws.w);
  Tensor w = init == Init::kZero ? Tensor::zeros(ws) : rng.normal_tensor(ws, gain * std::sqrt(2.0 / fan_in));
  ConvLayer layer;
  layer.spec = spec;
  layer.weight = &params.add(name + ".weight", std::move(w), "conv_weight");
  layer.bias = &params.add(name + ".bias", Tensor::zeros(Shape{spec.out_channels, 1, 1, 1}), "conv_bias");
  return layer;
}

Var ConvLayer::operator()(Tape& tape, const Var& x) const {
  return conv2d(x, tape.param(*weight), tape.param(*bias), spec);
}

ConvTransposeLayer ConvTransposeLayer::create(ParameterSet& params, const std::string& name, std::size_t in,
                                              std::size_t out, InitRng& rng) {
  ConvTransposeLayer layer;
  layer.in_channels = in;
  layer.out_channels = out;
  const Shape ws{in, out, layer.kernel, layer.kernel};
  // Each output pixel of a stride-2, k=4 transposed conv sees in * 4 taps.
  const double fan_in = static_cast<double>(in * 4);
  layer.weight = &params.add(name + ".weight", rng.normal_tensor(ws, std::sqrt(2.0 / fan_in)), "deconv_weight");
  layer.bias = &params.add(name + ".bias", Tensor::zeros(Shape{out, 1, 1, 1}), "deconv_bias");
  return layer;
}

Var ConvTransposeLayer::operator()(Tape& tape, const Var& x) const {
  return conv_transpose2d(x, tape.param(*weight), tape.param(*bias), stride, padding);
}

}  // namespace snad
