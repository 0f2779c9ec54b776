#pragma once

// Small sample statistics over runs.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pglab/linalg.hpp"

namespace pglab::stats {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

inline Vector mean(const std::vector<Vector>& xs) {
  Vector m = Vector::Zero(xs.empty() ? 0 : xs.front().size());
  for (const auto& x : xs) m += x;
  if (!xs.empty()) m /= static_cast<double>(xs.size());
  return m;
}

/// Unbiased sample covariance of vectors.
inline Matrix covariance(const std::vector<Vector>& xs) {
  const Index k = xs.empty() ? 0 : xs.front().size();
  Matrix c = Matrix::Zero(k, k);
  if (xs.size() < 2) return c;
  const Vector m = mean(xs);
  for (const auto& x : xs) c += (x - m) * (x - m).transpose();
  return c / static_cast<double>(xs.size() - 1);
}

/// Componentwise standard error of the mean.
inline Vector standard_error(const std::vector<Vector>& xs) {
  return (covariance(xs).diagonal() / static_cast<double>(xs.size())).cwiseSqrt();
}

}  // namespace pglab::stats
