#include "snad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conv_kernels.hpp"

namespace snad {

// ---- ParameterSet ------------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Tensor value, std::string role) {
  if (find(name)) throw std::invalid_argument("parameter registered twice: " + name);
  params_.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(value), std::move(role)}));
  return *params_.back();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterSet::index_of(const Parameter& p) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].get() == &p) return i;
  throw std::invalid_argument("parameter not in set: " + p.name);
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : params_) out.add(p->name, p->value, p->role);
  return out;
}

// ---- Tape --------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, {}, true, false, &p});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (!v.valid()) continue;
    if (&v.tape() != this) throw std::logic_error("op mixes vars from different tapes");
    needs = needs || v.requires_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& buf = grad_buffer(id);
  require_same_shape(buf, g, "gradient accumulation");
  buf += g;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw std::logic_error("backward: loss belongs to another tape");
  if (loss.value().numel() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + loss.shape().str());
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  backward_done_ = true;
  if (!loss.requires_grad()) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor::zeros(n.value.shape());
}

std::vector<Tensor> Tape::gradients(const ParameterSet& params) const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter* p = &params[i];
    auto it = param_nodes_.find(p);
    if (it != param_nodes_.end() && nodes_[it->second].has_grad)
      out.push_back(nodes_[it->second].grad);
    else
      out.push_back(Tensor::zeros(p->value.shape()));
  }
  return out;
}

std::size_t Tape::op_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return static_cast<bool>(n.backward);
  }));
}

// ---- elementwise ---------------------------------------------------------------

namespace {

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

/// Unary op whose derivative is a function of the input.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  const std::size_t ia = a.id();
  return a.tape().record(map(a.value(), fwd), {a}, [ia, deriv](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(ia);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * deriv(x[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g * -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& vb = t.value(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& va = t.value(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(const Var& a, double s) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value() * s, {a}, [ia, s](Tape& t, const Tensor& g) { t.accumulate(ia, g * s); });
}

Var add_scalar(const Var& a, double s) {
  const std::size_t ia = a.id();
  return a.tape().record(map(a.value(), [s](double v) { return v + s; }), {a},
                         [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

namespace {

// Expands a (N,1,H,W) mask to the channel count of `like`.
Tensor broadcast_mask(const Tensor& mask, const Shape& like) {
  const Shape& ms = mask.shape();
  if (ms == like) return mask;
  if (ms.n != like.n || ms.c != 1 || ms.h != like.h || ms.w != like.w)
    throw ShapeError("mask shape " + ms.str() + " not broadcastable to " + like.str());
  Tensor out(like);
  for (std::size_t n = 0; n < like.n; ++n)
    for (std::size_t c = 0; c < like.c; ++c) std::copy_n(mask.plane(n, 0), like.plane(), out.plane(n, c));
  return out;
}

}  // namespace

Var mul_mask(const Var& a, const Tensor& mask) {
  Tensor m = broadcast_mask(mask, a.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * m[i];
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m = std::move(m)](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * m[i];
  });
}

Var add_constant(const Var& a, const Tensor& c) {
  require_same_shape(a.value(), c, "add_constant");
  const std::size_t ia = a.id();
  return a.tape().record(a.value() + c, {a}, [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

Var relu(const Var& a) {
  return unary(
      a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double v) { return v > 0.0 ? v : slope * v; }, [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(a, sig, [sig](double v) {
    double s = sig(v);
    return s * (1.0 - s);
  });
}

Var softplus(const Var& a) {
  auto sp = [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(a, sp, sig);
}

Var abs(const Var& a) {
  return unary(
      a, [](double v) { return std::abs(v); }, [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var log(const Var& a) {
  return unary(
      a, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Var square(const Var& a) {
  return unary(
      a, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

// ---- reductions ----------------------------------------------------------------

Var sum(const Var& a) {
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(a.value().sum()), {a}, [ia](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[0];
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().numel());
  return scale(sum(a), inv);
}

Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.empty() || scalars.size() != weights.size())
    throw std::invalid_argument("weighted_sum: need matching non-empty scalars and weights");
  double total = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    total += weights[i] * scalars[i].value().item();
    ids.push_back(scalars[i].id());
  }
  return scalars[0].tape().record(Tensor::scalar(total), scalars, [ids, weights](Tape& t, const Tensor& g) {
    for (std::size_t i = 0; i < ids.size(); ++i) t.accumulate(ids[i], Tensor::scalar(g[0] * weights[i]));
  });
}

// ---- structure -----------------------------------------------------------------

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape s = parts[0].shape();
  std::size_t total_c = 0;
  for (const Var& p : parts) {
    const Shape& ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w)
      throw ShapeError("concat_channels: incompatible shapes " + s.str() + " and " + ps.str());
    total_c += ps.c;
  }
  Shape os{s.n, total_c, s.h, s.w};
  Tensor out(os);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t n = 0; n < s.n; ++n)
      std::copy_n(v.plane(n, 0), v.shape().c * s.plane(), out.plane(n, off));
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.shape().c;
  }
  return parts[0].tape().record(std::move(out), parts, [ids, offsets](Tape& t, const Tensor& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& gp = t.grad_buffer(ids[k]);
      const Shape& ps = gp.shape();
      for (std::size_t n = 0; n < ps.n; ++n) {
        const double* src = g.plane(n, offsets[k]);
        double* dst = gp.plane(n, 0);
        for (std::size_t i = 0; i < ps.c * ps.plane(); ++i) dst[i] += src[i];
      }
    }
  });
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::max(src, 0.0);
    std::size_t i0 = std::min(static_cast<std::size_t>(src), in - 1);
    std::size_t i1 = std::min(i0 + 1, in - 1);
    double f = src - static_cast<double>(i0);
    taps[o] = Tap{i0, i1, 1.0 - f, f};
  }
  return taps;
}

}  // namespace

Var resize_bilinear(const Var& x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: zero target size");
  auto ty = bilinear_taps(s.h, out_h);
  auto tx = bilinear_taps(s.w, out_w);
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = x.value().plane(n, c);
      double* dst = out.plane(n, c);
      for (std::size_t oy = 0; oy < out_h; ++oy)
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const Tap& a = ty[oy];
          const Tap& b = tx[ox];
          dst[oy * out_w + ox] = a.w0 * (b.w0 * src[a.i0 * s.w + b.i0] + b.w1 * src[a.i0 * s.w + b.i1]) +
                                 a.w1 * (b.w0 * src[a.i1 * s.w + b.i0] + b.w1 * src[a.i1 * s.w + b.i1]);
        }
    }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, ty, tx, out_h, out_w](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(ix);
    const Shape& s = gx.shape();
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double* dy = g.plane(n, c);
        double* dst = gx.plane(n, c);
        for (std::size_t oy = 0; oy < out_h; ++oy)
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const Tap& a = ty[oy];
            const Tap& b = tx[ox];
            double d = dy[oy * out_w + ox];
            dst[a.i0 * s.w + b.i0] += a.w0 * b.w0 * d;
            dst[a.i0 * s.w + b.i1] += a.w0 * b.w1 * d;
            dst[a.i1 * s.w + b.i0] += a.w1 * b.w0 * d;
            dst[a.i1 * s.w + b.i1] += a.w1 * b.w1 * d;
          }
      }
  });
}

// ---- layers --------------------------------------------------------------------

Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvSpec& spec) {
  const Tensor* b = bias.valid() ? &bias.value() : nullptr;
  Tensor y = kernels::conv2d_forward(x.value(), weight.value(), b, spec);
  const std::size_t ix = x.id(), iw = weight.id();
  const bool has_bias = bias.valid();
  const std::size_t ib = has_bias ? bias.id() : 0;
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return x.tape().record(std::move(y), inputs, [=](Tape& t, const Tensor& g) {
    Tensor* gx = t.requires_grad(ix) ? &t.grad_buffer(ix) : nullptr;
    Tensor* gw = t.requires_grad(iw) ? &t.grad_buffer(iw) : nullptr;
    Tensor* gb = has_bias && t.requires_grad(ib) ? &t.grad_buffer(ib) : nullptr;
    kernels::conv2d_backward(t.value(ix), t.value(iw), spec, g, gx, gw, gb);
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding) {
  const Tensor* b = bias.valid() ? &bias.value() : nullptr;
  Tensor y = kernels::conv_transpose2d_forward(x.value(), weight.value(), b, stride, padding);
  const std::size_t ix = x.id(), iw = weight.id();
  const bool has_bias = bias.valid();
  const std::size_t ib = has_bias ? bias.id() : 0;
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return x.tape().record(std::move(y), inputs, [=](Tape& t, const Tensor& g) {
    Tensor* gx = t.requires_grad(ix) ? &t.grad_buffer(ix) : nullptr;
    Tensor* gw = t.requires_grad(iw) ? &t.grad_buffer(iw) : nullptr;
    Tensor* gb = has_bias && t.requires_grad(ib) ? &t.grad_buffer(ib) : nullptr;
    kernels::conv_transpose2d_backward(t.value(ix), t.value(iw), stride, padding, g, gx, gw, gb);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const std::size_t k = xs.c * xs.h * xs.w;
  if (ws.c != k || ws.h != 1 || ws.w != 1)
    throw ShapeError("linear: weight " + ws.str() + " incompatible with input features " + std::to_string(k));
  if (bias.valid() && bias.value().numel() != ws.n) throw ShapeError("linear: bias length mismatch");
  Tensor y(Shape{xs.n, ws.n, 1, 1});
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o) {
      double acc = bias.valid() ? bias.value()[o] : 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += wv[o * k + i] * xv[n * k + i];
      y[n * ws.n + o] = acc;
    }
  const std::size_t ix = x.id(), iw = weight.id();
  const bool has_bias = bias.valid();
  const std::size_t ib = has_bias ? bias.id() : 0;
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  const std::size_t batch = xs.n, outs = ws.n;
  return x.tape().record(std::move(y), inputs, [=](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(ix);
    const Tensor& wv = t.value(iw);
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t o = 0; o < outs; ++o) {
        double d = g[n * outs + o];
        if (t.requires_grad(ix)) {
          Tensor& gx = t.grad_buffer(ix);
          for (std::size_t i = 0; i < k; ++i) gx[n * k + i] += wv[o * k + i] * d;
        }
        if (t.requires_grad(iw)) {
          Tensor& gw = t.grad_buffer(iw);
          for (std::size_t i = 0; i < k; ++i) gw[o * k + i] += xv[n * k + i] * d;
        }
        if (has_bias && t.requires_grad(ib)) t.grad_buffer(ib)[o] += d;
      }
  });
}

Var standardize_groups(const Var& x, const std::vector<std::uint32_t>& group, std::size_t group_count, double eps,
                       GroupStats* stats) {
  const Tensor& xv = x.value();
  if (group.size() != xv.numel())
    throw ShapeError("standardize_groups: group index length " + std::to_string(group.size()) +
                     " != tensor size " + std::to_string(xv.numel()));
  if (!(eps > 0.0)) throw std::invalid_argument("standardize_groups: eps must be > 0");

  std::vector<double> mu(group_count, 0.0), var(group_count, 0.0);
  std::vector<std::size_t> cnt(group_count, 0);
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    if (group[i] == kNoGroup) continue;
    mu[group[i]] += xv[i];
    ++cnt[group[i]];
  }
  for (std::size_t k = 0; k < group_count; ++k) mu[k] = cnt[k] ? mu[k] / static_cast<double>(cnt[k]) : 0.0;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    if (group[i] == kNoGroup) continue;
    double d = xv[i] - mu[group[i]];
    var[group[i]] += d * d;
  }
  std::vector<double> inv_std(group_count);
  for (std::size_t k = 0; k < group_count; ++k) {
    if (cnt[k]) {
      var[k] /= static_cast<double>(cnt[k]);
      inv_std[k] = 1.0 / std::sqrt(var[k] + eps);
    } else {
      // Empty group: sentinel statistics, nothing is emitted.
      mu[k] = 0.0;
      var[k] = 1.0;
      inv_std[k] = 1.0;
    }
  }

  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i)
    y[i] = group[i] == kNoGroup ? 0.0 : (xv[i] - mu[group[i]]) * inv_std[group[i]];

  if (stats) *stats = GroupStats{mu, var, cnt};

  const std::size_t ix = x.id();
  const std::size_t iy = x.tape().next_id();
  // dx = inv_std * (dy - mean_g(dy) - y * mean_g(dy * y))
  return x.tape().record(std::move(y), {x}, [ix, iy, group, group_count, inv_std, cnt](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(iy);
    std::vector<double> mdy(group_count, 0.0), mdyy(group_count, 0.0);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (group[i] == kNoGroup) continue;
      mdy[group[i]] += g[i];
      mdyy[group[i]] += g[i] * yv[i];
    }
    for (std::size_t k = 0; k < group_count; ++k)
      if (cnt[k]) {
        mdy[k] /= static_cast<double>(cnt[k]);
        mdyy[k] /= static_cast<double>(cnt[k]);
      }
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const std::uint32_t k = group[i];
      if (k == kNoGroup) continue;
      gx[i] += inv_std[k] * (g[i] - mdy[k] - yv[i] * mdyy[k]);
    }
  });
}

}  // namespace snad
