#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mvlens {

/// Incremental mean; exact for constant sequences (sum / n is not).
class RunningMean {
 public:
  void add(double x) {
    ++n_;
    mean_ += (x - mean_) / static_cast<double>(n_);
  }
  double value() const { return mean_; }
  std::size_t count() const { return n_; }

 private:
  double mean_ = 0.0;
  std::size_t n_ = 0;
};

double mean(std::span<const double> values);

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Ordinary least-squares slope of y against x = 0, 1, ..., n-1.
double least_squares_slope(std::span<const double> y);

}  // namespace mvlens
