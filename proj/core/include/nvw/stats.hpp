#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nvw {

double mean(std::span<const double> v);
/// Sample variance with `ddof` degrees of freedom removed.
double variance(std::span<const double> v, std::size_t ddof = 1);
double stddev(std::span<const double> v, std::size_t ddof = 1);
/// Population skewness m3 / m2^1.5.
double skewness(std::span<const double> v);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);
double pearson(std::span<const double> a, std::span<const double> b);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double residual_rms = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = slope * x + intercept. Throws InvalidArgument
/// for fewer than 3 points or zero spread in x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;

  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
  std::size_t total() const;
};

/// Bin width 2 IQR n^(-1/3) over [min, max].
Histogram freedman_diaconis(std::span<const double> v);

/// Tallest bin, refined by a parabola through it and its neighbours.
double histogram_mode(const Histogram& h);

/// Peaks whose prominence exceeds `tol_sigma` * sqrt(count); counting noise
/// alone does not add modes.
std::size_t count_modes(const Histogram& h, double tol_sigma = 3.0);

/// Size of the largest 4-connected component of set pixels.
std::size_t largest_component(const std::vector<unsigned char>& mask, std::size_t rows,
                              std::size_t cols);

}  // namespace nvw
