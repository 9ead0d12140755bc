// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vtlm/common.hpp"

namespace vtlm {

inline double distance(double gx, double gy, double px, double py) {
  const double dx = gx - px;
  const double dy = gy - py;
  return std::sqrt(dx * dx + dy * dy);
}

// Root mean squared error over per-sample (dx, dy) residuals, in the same
// unit as the inputs: sqrt((1/Q) * sum(dx^2 + dy^2)).
inline double rmse(const std::vector<std::pair<double, double>>& errors) {
  if (errors.empty()) throw ConfigError("rmse of an empty residual list");
  double sum = 0.0;
  for (const auto& [dx, dy] : errors) sum += dx * dx + dy * dy;
  return std::sqrt(sum / static_cast<double>(errors.size()));
}

// Same measure when only Euclidean distances are at hand (d^2 = dx^2 + dy^2).
inline double rmse_from_distances(const std::vector<double>& distances) {
  if (distances.empty()) throw ConfigError("rmse of an empty distance list");
  double sum = 0.0;
  for (double d : distances) sum += d * d;
  return std::sqrt(sum / static_cast<double>(distances.size()));
}

// Percentage of distances strictly greater than the threshold.
inline double outlier_rate(const std::vector<double>& distances,
                           double threshold = 5.0) {
  if (distances.empty()) throw ConfigError("outlier rate of an empty distance list");
  std::size_t count = 0;
  for (double d : distances)
    if (d > threshold) ++count;
  return 100.0 * static_cast<double>(count) / static_cast<double>(distances.size());
}

struct TTestResult {
  double t = 0.0;
  int df = 0;
  double p = 1.0;  // two-tailed
  int n = 0;
};

namespace metrics_detail {

// Continued fraction for the regularized incomplete beta function
// (modified Lentz); converges quickly for x < (a+1)/(a+b+2).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

inline double regularized_incomplete_beta(double x, double a, double b) {
  if (x < 0.0 || x > 1.0)
    throw NumericError("incomplete beta argument outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

// P(|T_df| > t) for Student's t.
inline double student_t_two_tailed(double t, int df) {
  const double nu = static_cast<double>(df);
  return regularized_incomplete_beta(nu / (nu + t * t), 0.5 * nu, 0.5);
}

}  // namespace metrics_detail

// Paired two-tailed t-test on matched observations. The difference series
// must have non-zero variance; a flat series has no defined statistic.
inline TTestResult paired_ttest(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ConfigError("paired t-test requires equal-length series");
  const std::size_t n = a.size();
  if (n < 2) throw ConfigError("paired t-test requires at least 2 pairs");

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n - 1);
  if (var <= 0.0)
    throw DegenerateVarianceError(
        "paired t-test on differences with zero variance");

  TTestResult result;
  result.n = static_cast<int>(n);
  result.df = static_cast<int>(n) - 1;
  result.t = mean / std::sqrt(var / static_cast<double>(n));
  result.p = metrics_detail::student_t_two_tailed(result.t, result.df);
  return result;
}

}  // namespace vtlm
