#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nvw/errors.hpp"
#include "nvw/stats.hpp"

using namespace nvw;

TEST(Moments, MeanVarianceSkewness) {
  const std::vector<double> v{1, 2, 3, 4, 10};
  EXPECT_DOUBLE_EQ(mean(v), 4.0);
  EXPECT_DOUBLE_EQ(variance(v), 12.5);
  EXPECT_DOUBLE_EQ(variance(v, 0), 10.0);
  EXPECT_DOUBLE_EQ(stddev(v), std::sqrt(12.5));
  EXPECT_GT(skewness(v), 0.0);
  const std::vector<double> sym{-2, -1, 0, 1, 2};
  EXPECT_NEAR(skewness(sym), 0.0, 1e-15);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
}

TEST(Pearson, PerfectAndAnti) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 4, 6, 8};
  const std::vector<double> c{4, 3, 2, 1};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
}

TEST(FitLine, ExactLine) {
  const std::vector<double> x{1, 2, 4, 10, 20};
  std::vector<double> y;
  for (double xi : x) {
    y.push_back(3.0 * xi - 0.5);
  }
  const LineFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 3.0, 1e-12);
  EXPECT_NEAR(f.intercept, -0.5, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-15);
  EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
  EXPECT_EQ(f.n, 5u);
}

TEST(FitLine, StandardErrorMatchesClosedForm) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{0, 1, 1, 3};
  const LineFit f = fit_line(x, y);
  // residuals of y = 0.9x - 0.1: 0.1, 0.2, -0.7, 0.4 -> ss = 0.7
  EXPECT_NEAR(f.slope, 0.9, 1e-12);
  EXPECT_NEAR(f.intercept, -0.1, 1e-12);
  EXPECT_NEAR(f.slope_se, std::sqrt(0.7 / 2.0 / 5.0), 1e-12);
}

TEST(FitLine, RejectsDegenerate) {
  const std::vector<double> x{1, 1, 1};
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(fit_line(x, y), InvalidArgument);
  const std::vector<double> two{1, 2};
  EXPECT_THROW(fit_line(two, two), InvalidArgument);
}

TEST(Histogram, FreedmanDiaconisWidthAndTotal) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(5.0, 1.0);
  std::vector<double> v(8000);
  for (double& x : v) {
    x = n(rng);
  }
  v.push_back(std::nan(""));
  const Histogram h = freedman_diaconis(v);
  EXPECT_EQ(h.total(), 8000u);
  const double iqr = quantile(std::vector<double>(v.begin(), v.end() - 1), 0.75) -
                     quantile(std::vector<double>(v.begin(), v.end() - 1), 0.25);
  const double fd = 2.0 * iqr / std::cbrt(8000.0);
  EXPECT_LE(h.width, fd * (1 + 1e-12));
  EXPECT_GT(h.width, 0.8 * fd);
  EXPECT_NEAR(histogram_mode(h), 5.0, 0.2);
  EXPECT_EQ(count_modes(h), 1u);
}

TEST(Histogram, CountsTwoSeparatedModes) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> a(0.0, 1.0);
  std::normal_distribution<double> b(10.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 4000; ++i) {
    v.push_back(a(rng));
    v.push_back(b(rng));
  }
  EXPECT_EQ(count_modes(freedman_diaconis(v)), 2u);
}

TEST(Histogram, ConstantInput) {
  const std::vector<double> v(10, 2.0);
  const Histogram h = freedman_diaconis(v);
  EXPECT_EQ(h.counts.size(), 1u);
  EXPECT_EQ(h.total(), 10u);
  EXPECT_EQ(count_modes(h), 1u);
}

TEST(Components, LargestFourConnected) {
  // 1 1 0
  // 0 1 0
  // 1 0 1
  const std::vector<unsigned char> m{1, 1, 0, 0, 1, 0, 1, 0, 1};
  EXPECT_EQ(largest_component(m, 3, 3), 3u);
  EXPECT_EQ(largest_component(std::vector<unsigned char>(9, 0), 3, 3), 0u);
}
