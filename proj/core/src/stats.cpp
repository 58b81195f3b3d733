#include "mvlens/stats.hpp"

#include <algorithm>
#include <cmath>

namespace mvlens {

double mean(std::span<const double> values) {
  RunningMean m;
  for (double v : values) m.add(v);
  return m.value();
}

double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double least_squares_slope(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double x_mean = static_cast<double>(n - 1) / 2.0;
  const double y_mean = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (y[i] - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace mvlens
