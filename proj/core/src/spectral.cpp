#include "snad/spectral.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace snad {

namespace {

using ConstMatrix = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstVector = Eigen::Map<const Eigen::VectorXd>;
using Vector = Eigen::Map<Eigen::VectorXd>;

std::size_t rows_of(const Tensor& w) { return w.shape().n; }
std::size_t cols_of(const Tensor& w) { return w.numel() / w.shape().n; }

void require_state(const Tensor& w, const SpectralState& s) {
  if (s.u.size() != rows_of(w) || (!s.v.empty() && s.v.size() != cols_of(w)))
    throw ShapeError("spectral state does not match weight " + w.shape().str());
}

double normalize_into(Eigen::VectorXd& x) {
  const double n = x.norm();
  if (n > kSpectralEps) x /= n;
  return n;
}

double estimate(const Tensor& w, const SpectralState& s) {
  ConstMatrix m(w.data().data(), rows_of(w), cols_of(w));
  const double sigma = ConstVector(s.u.data(), s.u.size()).dot(m * ConstVector(s.v.data(), s.v.size()));
  return std::max(sigma, kSpectralEps);
}

// A frozen state that was never iterated has no v yet.
bool use_frozen(const SpectralState& s) { return s.frozen && s.sigma > 0.0; }

}  // namespace

SpectralState SpectralState::create(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd u(static_cast<Eigen::Index>(rows));
  for (auto& x : u) x = dist(rng);
  normalize_into(u);
  SpectralState s;
  s.u.assign(u.begin(), u.end());
  s.v.assign(cols, 0.0);
  return s;
}

double power_iteration(const Tensor& weight, SpectralState& state, std::size_t iters) {
  require_state(weight, state);
  ConstMatrix m(weight.data().data(), rows_of(weight), cols_of(weight));
  Eigen::VectorXd u = ConstVector(state.u.data(), state.u.size());
  Eigen::VectorXd v(m.cols());
  if (state.v.size() == static_cast<std::size_t>(m.cols())) v = ConstVector(state.v.data(), state.v.size());
  for (std::size_t i = 0; i < iters; ++i) {
    v = m.transpose() * u;
    if (normalize_into(v) <= kSpectralEps) break;
    u = m * v;
    if (normalize_into(u) <= kSpectralEps) break;
  }
  state.u.assign(u.begin(), u.end());
  state.v.assign(v.begin(), v.end());
  state.sigma = estimate(weight, state);
  return state.sigma;
}

Tensor spectral_normalize(const Tensor& weight, SpectralState& state, std::size_t iters) {
  const double sigma = use_frozen(state) ? estimate(weight, state) : power_iteration(weight, state, iters);
  return weight * (1.0 / sigma);
}

Var spectral_normalize(const Var& weight, SpectralState& state, std::size_t iters) {
  const Tensor& w = weight.value();
  const double sigma = use_frozen(state) ? estimate(w, state) : power_iteration(w, state, iters);
  Tensor out = w * (1.0 / sigma);
  Tape& tape = weight.tape();
  const std::size_t iw = weight.id(), iy = tape.next_id();
  std::vector<double> u = state.u, v = state.v;
  return tape.record(std::move(out), {weight},
                     [iw, iy, sigma, u = std::move(u), v = std::move(v)](Tape& t, const Tensor& g) {
                       const Tensor& y = t.value(iy);
                       double inner = 0.0;
                       for (std::size_t i = 0; i < g.numel(); ++i) inner += g[i] * y[i];
                       Tensor dw(g.shape());
                       const std::size_t cols = v.size();
                       for (std::size_t r = 0; r < u.size(); ++r)
                         for (std::size_t c = 0; c < cols; ++c) {
                           const std::size_t i = r * cols + c;
                           dw[i] = (g[i] - inner * u[r] * v[c]) / sigma;
                         }
                       t.accumulate(iw, dw);
                     });
}

double top_singular_value(const Tensor& weight) {
  ConstMatrix m(weight.data().data(), rows_of(weight), cols_of(weight));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

SpectralConv SpectralConv::create(ParameterSet& params, const std::string& name, const ConvSpec& spec,
                                  InitRng& rng) {
  SpectralConv layer;
  layer.conv = ConvLayer::create(params, name, spec, rng);
  const Tensor& w = layer.conv.weight->value;
  layer.state = SpectralState::create(rows_of(w), cols_of(w), rng.engine()());
  return layer;
}

Var SpectralConv::operator()(Tape& tape, const Var& x) {
  Var w = spectral_normalize(tape.param(*conv.weight), state, iters);
  return conv2d(x, w, tape.param(*conv.bias), conv.spec);
}

Tensor SpectralConv::normalized_weight() const {
  SpectralState s = state;
  s.frozen = true;
  return spectral_normalize(conv.weight->value, s);
}

SpectralLinear SpectralLinear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                                      InitRng& rng) {
  SpectralLinear layer;
  layer.weight = &params.add(name + ".weight", rng.normal_tensor(Shape{out, in, 1, 1}, std::sqrt(1.0 / in)),
                             "dense_weight");
  layer.bias = &params.add(name + ".bias", Tensor::zeros(Shape{out, 1, 1, 1}), "dense_bias");
  layer.state = SpectralState::create(out, in, rng.engine()());
  return layer;
}

Var SpectralLinear::operator()(Tape& tape, const Var& x) {
  Var w = spectral_normalize(tape.param(*weight), state, iters);
  return linear(x, w, tape.param(*bias));
}

Tensor SpectralLinear::normalized_weight() const {
  SpectralState s = state;
  s.frozen = true;
  return spectral_normalize(weight->value, s);
}

}  // namespace snad
