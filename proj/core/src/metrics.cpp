#include "snad/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace snad {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  require_same_shape(a, b, "ssim");
  const Shape& s = a.shape();
  const std::size_t k = o.window;
  if (s.h < k || s.w < k)
    throw ShapeError("ssim: image " + s.str() + " smaller than the " + std::to_string(k) + "x" + std::to_string(k) +
                     " window");
  std::vector<double> g(k);
  double gs = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(k - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    gs += g[i];
  }
  for (double& x : g) x /= gs;
  const double c1 = (o.k1 * o.peak) * (o.k1 * o.peak), c2 = (o.k2 * o.peak) * (o.k2 * o.peak);
  const std::size_t oh = s.h - k + 1, ow = s.w - k + 1;
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* pa = a.plane(n, c);
      const double* pb = b.plane(n, c);
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const double wt = g[i] * g[j];
              const double va = pa[(y + i) * s.w + x + j], vb = pb[(y + i) * s.w + x + j];
              ma += wt * va;
              mb += wt * vb;
              saa += wt * va * va;
              sbb += wt * vb * vb;
              sab += wt * va * vb;
            }
          const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
          total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
  return total / static_cast<double>(s.n * s.c * oh * ow);
}

double l1_percent(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "l1");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
  return 100.0 * s / (static_cast<double>(a.numel()) * peak);
}

double psnr_for_text(double db) { return std::isfinite(db) && db < kPsnrTextCap ? db : kPsnrTextCap; }

MetricRow compare_images(const std::string& pair_id, const Tensor& a, const Tensor& b) {
  return MetricRow{pair_id, psnr(a, b), ssim(a, b), l1_percent(a, b)};
}

void write_metric_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "pair_id,psnr_db,ssim,l1_pct\n";
  const auto flags = os.flags();
  os << std::setprecision(10);
  for (const MetricRow& r : rows)
    os << r.pair_id << ',' << psnr_for_text(r.psnr_db) << ',' << r.ssim << ',' << r.l1_pct << '\n';
  os.flags(flags);
}

}  // namespace snad
