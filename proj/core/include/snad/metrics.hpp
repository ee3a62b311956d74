#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "snad/tensor.hpp"

namespace snad {

/// 10 log10(peak^2 / MSE); +infinity for identical inputs.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean SSIM over all fully contained Gaussian windows of every (n, c) plane.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& options = {});

/// Mean absolute difference as a percentage of peak.
double l1_percent(const Tensor& a, const Tensor& b, double peak = 1.0);

/// PSNR for text output: infinities and values above 99 print as 99.
inline constexpr double kPsnrTextCap = 99.0;
double psnr_for_text(double db);

struct MetricRow {
  std::string pair_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double l1_pct = 0.0;
};

MetricRow compare_images(const std::string& pair_id, const Tensor& a, const Tensor& b);
void write_metric_csv(std::ostream& os, const std::vector<MetricRow>& rows);

}  // namespace snad
