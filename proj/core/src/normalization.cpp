#include "snad/normalization.hpp"

#include <cmath>
#include <stdexcept>

namespace snad {

namespace {

void require_mask_fits(const Tensor& mask, const Shape& fs, const char* what) {
  const Shape& ms = mask.shape();
  if (ms.n != fs.n || ms.c != 1 || ms.h != fs.h || ms.w != fs.w)
    throw ShapeError(std::string(what) + ": mask " + ms.str() + " does not match feature " + fs.str());
}

// Group of element (n, c, pixel) is (n*C + c)*2 + (0 fg | 1 bg).
std::vector<std::uint32_t> separable_groups(const Shape& fs, const RegionMasks& masks) {
  require_mask_fits(masks.foreground, fs, "sn_forward");
  require_mask_fits(masks.background, fs, "sn_forward");
  const std::size_t hw = fs.plane();
  std::vector<std::uint32_t> group(fs.numel());
  for (std::size_t n = 0; n < fs.n; ++n)
    for (std::size_t c = 0; c < fs.c; ++c)
      for (std::size_t i = 0; i < hw; ++i) {
        const double f = masks.foreground[n * hw + i];
        const double b = masks.background[n * hw + i];
        const std::uint32_t base = static_cast<std::uint32_t>((n * fs.c + c) * 2);
        std::uint32_t g = kNoGroup;
        if (f != 0.0)
          g = base;
        else if (b != 0.0)
          g = base + 1;
        group[(n * fs.c + c) * hw + i] = g;
      }
  return group;
}

}  // namespace

MaskedMoments reduce_masked_mean_var(const Tensor& x, const Tensor& mask) {
  const Shape& fs = x.shape();
  require_mask_fits(mask, fs, "reduce_masked_mean_var");
  const std::size_t hw = fs.plane();
  MaskedMoments m;
  for (std::size_t n = 0; n < fs.n; ++n)
    for (std::size_t c = 0; c < fs.c; ++c) {
      const double* px = x.plane(n, c);
      const double* pm = mask.plane(n, 0);
      double s = 0.0, cnt = 0.0;
      for (std::size_t i = 0; i < hw; ++i)
        if (pm[i] != 0.0) {
          s += px[i];
          cnt += 1.0;
        }
      if (cnt == 0.0) {
        m.mean.push_back(0.0);
        m.var.push_back(1.0);
        m.empty.push_back(true);
        continue;
      }
      const double mu = s / cnt;
      double v = 0.0;
      for (std::size_t i = 0; i < hw; ++i)
        if (pm[i] != 0.0) v += (px[i] - mu) * (px[i] - mu);
      m.mean.push_back(mu);
      m.var.push_back(v / cnt);
      m.empty.push_back(false);
    }
  return m;
}

Var sn_forward(const Var& features, const RegionMasks& masks, double eps, SnStats* stats) {
  if (!(eps > 0.0)) throw std::invalid_argument("sn_forward: eps must be > 0");
  const Shape& fs = features.shape();
  GroupStats gs;
  Var out = standardize_groups(features, separable_groups(fs, masks), fs.n * fs.c * 2, eps, &gs);
  if (stats) {
    SnStats s;
    s.batch = fs.n;
    s.channels = fs.c;
    s.eps = eps;
    for (std::size_t k = 0; k < fs.n * fs.c; ++k) {
      s.mean_fg.push_back(gs.mean[2 * k]);
      s.var_fg.push_back(gs.var[2 * k]);
      s.mean_bg.push_back(gs.mean[2 * k + 1]);
      s.var_bg.push_back(gs.var[2 * k + 1]);
    }
    for (std::size_t n = 0; n < fs.n; ++n) {
      s.count_fg.push_back(gs.count[2 * n * fs.c]);
      s.count_bg.push_back(gs.count[2 * n * fs.c + 1]);
    }
    *stats = std::move(s);
  }
  return out;
}

Tensor sn_forward_squared_variant(const Tensor& features, const RegionMasks& masks, double eps) {
  Tape tape;
  SnStats st;
  (void)sn_forward(tape.constant(features), masks, eps, &st);
  const Shape& fs = features.shape();
  const std::size_t hw = fs.plane();
  Tensor out(fs);
  for (std::size_t n = 0; n < fs.n; ++n)
    for (std::size_t c = 0; c < fs.c; ++c) {
      const std::size_t k = n * fs.c + c;
      const double sf = std::sqrt(st.var_fg[k] + eps), sb = std::sqrt(st.var_bg[k] + eps);
      for (std::size_t i = 0; i < hw; ++i) {
        const double x = features[k * hw + i];
        if (masks.foreground[n * hw + i] != 0.0)
          out[k * hw + i] = (x - st.mean_fg[k]) * (x - st.mean_fg[k]) / sf;
        else if (masks.background[n * hw + i] != 0.0)
          out[k * hw + i] = (x - st.mean_bg[k]) * (x - st.mean_bg[k]) / sb;
      }
    }
  return out;
}

Var instance_norm(const Var& features, double eps) {
  const Shape& fs = features.shape();
  std::vector<std::uint32_t> group(fs.numel());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<std::uint32_t>(i / fs.plane());
  return standardize_groups(features, group, fs.n * fs.c, eps);
}

Var batch_norm(const Var& features, double eps) {
  const Shape& fs = features.shape();
  std::vector<std::uint32_t> group(fs.numel());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<std::uint32_t>((i / fs.plane()) % fs.c);
  return standardize_groups(features, group, fs.c, eps);
}

const char* norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::kSeparable: return "sn";
    case NormKind::kInstance: return "in";
    case NormKind::kBatch: return "bn";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "sn") return NormKind::kSeparable;
  if (name == "in") return NormKind::kInstance;
  if (name == "bn") return NormKind::kBatch;
  throw std::invalid_argument("unknown normalization '" + name + "' (expected sn, in or bn)");
}

Var normalize(NormKind kind, const Var& features, const RegionMasks& masks, double eps) {
  switch (kind) {
    case NormKind::kSeparable: return sn_forward(features, masks, eps);
    case NormKind::kInstance: return instance_norm(features, eps);
    case NormKind::kBatch: return batch_norm(features, eps);
  }
  throw std::invalid_argument("normalize: bad kind");
}

AdParams AdParams::create(ParameterSet& params, const std::string& name, std::size_t channels, InitRng& rng,
                          std::size_t hidden) {
  AdParams p;
  p.shared = ConvLayer::create(params, name + ".ad_shared", ConvSpec::same(kRegionCount, hidden), rng);
  p.gamma = ConvLayer::create(params, name + ".ad_gamma", ConvSpec::same(hidden, channels), rng, Init::kZero);
  p.beta = ConvLayer::create(params, name + ".ad_beta", ConvSpec::same(hidden, channels), rng, Init::kZero);
  return p;
}

Var ad_forward(const Var& normalized, const Tensor& onehot, const AdParams& params) {
  const Shape& fs = normalized.shape();
  const Shape& ps = onehot.shape();
  if (ps.n != fs.n || ps.h != fs.h || ps.w != fs.w)
    throw ShapeError("ad_forward: label map " + ps.str() + " does not match feature resolution " + fs.str());
  if (ps.c != kRegionCount) throw ShapeError("ad_forward: label map must be one-hot over 4 classes, got " + ps.str());
  Tape& tape = normalized.tape();
  Var hidden = params.shared(tape, tape.constant(onehot));
  Var gamma = params.gamma(tape, hidden);
  Var beta = params.beta(tape, hidden);
  if (gamma.shape() != fs) throw ShapeError("ad_forward: gamma head yields " + gamma.shape().str());
  return add(add(normalized, mul(normalized, gamma)), beta);
}

Var snad_layer(const Var& features, const RegionMasks& masks, const Tensor& onehot, const AdParams& params,
               NormKind kind) {
  return ad_forward(normalize(kind, features, masks), onehot, params);
}

SnadBlockParams SnadBlockParams::create(ParameterSet& params, const std::string& name, std::size_t in,
                                        std::size_t out, InitRng& rng, std::size_t ad_hidden) {
  SnadBlockParams p;
  p.in_channels = in;
  p.out_channels = out;
  p.snad1 = AdParams::create(params, name + ".snad1", in, rng, ad_hidden);
  p.conv1 = ConvLayer::create(params, name + ".conv1", ConvSpec::same(in, out), rng);
  p.snad2 = AdParams::create(params, name + ".snad2", out, rng, ad_hidden);
  p.conv2 = ConvLayer::create(params, name + ".conv2", ConvSpec::same(out, out), rng);
  p.skip = AdParams::create(params, name + ".snad_skip", in, rng, ad_hidden);
  p.up = ConvTransposeLayer::create(params, name + ".up", out + in, out, rng);
  p.conv_out = ConvLayer::create(params, name + ".conv_out", ConvSpec::same(out, out), rng);
  return p;
}

Var snad_block(const Var& features, const RegionMasks& masks, const Tensor& onehot, const SnadBlockParams& p,
               NormKind kind) {
  if (features.shape().c != p.in_channels)
    throw ShapeError("snad_block: expected " + std::to_string(p.in_channels) + " channels, got " +
                     features.shape().str());
  Tape& tape = features.tape();
  Var a = p.conv1(tape, relu(snad_layer(features, masks, onehot, p.snad1, kind)));
  a = p.conv2(tape, relu(snad_layer(a, masks, onehot, p.snad2, kind)));
  Var b = snad_layer(features, masks, onehot, p.skip, kind);
  Var merged = relu(concat_channels({a, b}));
  return p.conv_out(tape, p.up(tape, merged));
}

DecompositionResidual decomposition_oracle(std::span<const double> values, std::span<const double> mask) {
  if (values.size() != mask.size()) throw std::invalid_argument("decomposition_oracle: size mismatch");
  DecompositionResidual r;
  double sf = 0.0, sb = 0.0, s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += values[i];
    if (mask[i] != 0.0) {
      sf += values[i];
      ++r.n_fg;
    } else {
      sb += values[i];
      ++r.n_bg;
    }
  }
  if (r.n_fg == 0 || r.n_bg == 0) throw std::invalid_argument("decomposition_oracle: both regions must be nonempty");
  const double n = static_cast<double>(values.size());
  const double nf = static_cast<double>(r.n_fg), nb = static_cast<double>(r.n_bg);
  r.mean = s / n;
  r.mean_fg = sf / nf;
  r.mean_bg = sb / nb;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - r.mean;
    r.var += d * d;
    if (mask[i] != 0.0) {
      const double e = values[i] - r.mean_fg;
      r.var_fg += e * e;
    } else {
      const double e = values[i] - r.mean_bg;
      r.var_bg += e * e;
    }
  }
  r.var /= n;
  r.var_fg /= nf;
  r.var_bg /= nb;
  const double composed_mean = (nb / n) * r.mean_bg + (nf / n) * r.mean_fg;
  const double gap = r.mean_bg - r.mean_fg;
  const double composed_var = (nf / n) * r.var_fg + (nb / n) * r.var_bg + (nf * nb / (n * n)) * gap * gap;
  r.mean_residual = std::abs(r.mean - composed_mean);
  r.var_residual = std::abs(r.var - composed_var);
  return r;
}

double region_bias(const Tensor& normalized, const RegionMasks& masks) {
  const Shape& fs = normalized.shape();
  require_mask_fits(masks.foreground, fs, "region_bias");
  const std::size_t hw = fs.plane();
  double worst = 0.0;
  for (std::size_t n = 0; n < fs.n; ++n)
    for (std::size_t c = 0; c < fs.c; ++c)
      for (const Tensor* m : {&masks.foreground, &masks.background}) {
        double s = 0.0, cnt = 0.0;
        for (std::size_t i = 0; i < hw; ++i)
          if ((*m)[n * hw + i] != 0.0) {
            s += normalized.plane(n, c)[i];
            cnt += 1.0;
          }
        if (cnt > 0) worst = std::max(worst, std::abs(s / cnt));
      }
  return worst;
}

}  // namespace snad
