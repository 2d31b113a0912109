#include "nvw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nvw/errors.hpp"

namespace nvw {

double mean(std::span<const double> v) {
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v, std::size_t ddof) {
  if (v.size() <= ddof) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return s / static_cast<double>(v.size() - ddof);
}

double stddev(std::span<const double> v, std::size_t ddof) { return std::sqrt(variance(v, ddof)); }

double skewness(std::span<const double> v) {
  const double m = mean(v);
  double m2 = 0.0;
  double m3 = 0.0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double n = static_cast<double>(v.size());
  m2 /= n;
  m3 /= n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvalidArgument("pearson needs two equal-length series");
  }
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw InvalidArgument("line fit needs at least 3 paired points");
  }
  const double n = static_cast<double>(x.size());
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) {
    throw InvalidArgument("line fit is degenerate: x has no spread");
  }
  LineFit fit;
  fit.n = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  const double s2 = ss_res / (n - 2.0);
  fit.slope_se = std::sqrt(s2 / sxx);
  fit.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  fit.residual_rms = std::sqrt(ss_res / n);
  return fit;
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram freedman_diaconis(std::span<const double> v) {
  std::vector<double> finite;
  finite.reserve(v.size());
  for (double x : v) {
    if (std::isfinite(x)) {
      finite.push_back(x);
    }
  }
  Histogram h;
  if (finite.empty()) {
    return h;
  }
  const auto [mn_it, mx_it] = std::minmax_element(finite.begin(), finite.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  const double iqr = quantile(finite, 0.75) - quantile(finite, 0.25);
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(finite.size()));
  if (!(width > 0.0) || mx == mn) {
    width = mx > mn ? (mx - mn) : 1.0;
  }
  const std::size_t bins =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil((mx - mn) / width)), 1, 10000);
  width = mx > mn ? (mx - mn) / static_cast<double>(bins) : width;
  h.lo = mn;
  h.width = width;
  h.counts.assign(bins, 0);
  for (double x : finite) {
    const auto i = static_cast<std::size_t>(std::floor((x - mn) / width));
    ++h.counts[std::min(i, bins - 1)];
  }
  return h;
}

double histogram_mode(const Histogram& h) {
  if (h.counts.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const std::size_t i = static_cast<std::size_t>(
      std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  const double c0 = static_cast<double>(h.counts[i]);
  const double cm = i > 0 ? static_cast<double>(h.counts[i - 1]) : 0.0;
  const double cp = i + 1 < h.counts.size() ? static_cast<double>(h.counts[i + 1]) : 0.0;
  const double den = cm - 2.0 * c0 + cp;
  double off = den < 0.0 ? 0.5 * (cm - cp) / den : 0.0;
  off = std::clamp(off, -0.5, 0.5);
  return h.center(i) + off * h.width;
}

std::size_t count_modes(const Histogram& h, double tol_sigma) {
  const auto& c = h.counts;
  const std::size_t n = c.size();
  std::size_t modes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || c[i] > c[i - 1];
    // plateaus: the peak is the leftmost bin of an equal run
    const bool right_ok = i + 1 == n || c[i] >= c[i + 1];
    if (!left_ok || !right_ok || c[i] == 0) {
      continue;
    }
    // prominence: drop needed to reach higher ground on either side
    std::size_t left_min = c[i];
    bool left_higher = false;
    for (std::size_t j = i; j-- > 0;) {
      left_min = std::min(left_min, c[j]);
      if (c[j] > c[i]) {
        left_higher = true;
        break;
      }
    }
    std::size_t right_min = c[i];
    bool right_higher = false;
    for (std::size_t j = i + 1; j < n; ++j) {
      right_min = std::min(right_min, c[j]);
      if (c[j] > c[i]) {
        right_higher = true;
        break;
      }
    }
    std::size_t base = 0;
    if (left_higher && right_higher) {
      base = std::max(left_min, right_min);
    } else if (left_higher) {
      base = left_min;
    } else if (right_higher) {
      base = right_min;
    }
    const double prominence = static_cast<double>(c[i] - base);
    if (!left_higher && !right_higher) {
      ++modes;  // global maximum
    } else if (prominence > tol_sigma * std::sqrt(static_cast<double>(c[i]))) {
      ++modes;
    }
  }
  return modes;
}

std::size_t largest_component(const std::vector<unsigned char>& mask, std::size_t rows,
                              std::size_t cols) {
  std::vector<unsigned char> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t best = 0;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) {
      continue;
    }
    std::size_t size = 0;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const std::size_t r = p / cols;
      const std::size_t c = p % cols;
      auto visit = [&](std::size_t q) {
        if (mask[q] && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - cols);
      if (r + 1 < rows) visit(p + cols);
      if (c > 0) visit(p - 1);
      if (c + 1 < cols) visit(p + 1);
    }
    best = std::max(best, size);
  }
  return best;
}

}  // namespace nvw
