#include "nvw/nv_physics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nvw/errors.hpp"
#include "nvw/geom_field.hpp"

namespace nvw {

NVModel::NVModel() : axes(nv_axes()) {}

void NVModel::validate() const {
  if (!(contrast > 0.0 && contrast < 1.0)) {
    throw InvalidArgument("contrast must be in (0, 1)");
  }
  if (!(linewidth_mhz > 0.0) || !std::isfinite(linewidth_mhz)) {
    throw InvalidArgument("linewidth must be positive");
  }
  if (!(fm_deviation_mhz > 0.0) || !std::isfinite(fm_deviation_mhz)) {
    throw InvalidArgument("FM deviation must be positive");
  }
  if (!(gyro_hz_per_nt > 0.0) || !std::isfinite(gyro_hz_per_nt)) {
    throw InvalidArgument("gyromagnetic ratio must be positive");
  }
  if (!std::isfinite(zero_field_splitting_mhz)) {
    throw InvalidArgument("zero-field splitting must be finite");
  }
  if (sensing_axis >= axes.size()) {
    throw InvalidArgument("sensing axis index out of range");
  }
  for (const Vec3& a : axes) {
    if (!(std::abs(norm(a) - 1.0) <= 1e-9)) {
      throw InvalidArgument("NV axes must be unit vectors");
    }
  }
}

std::array<Resonance, 8> resonance_frequencies(Vec3 B, const NVModel& model) {
  std::array<Resonance, 8> out{};
  for (std::size_t a = 0; a < 4; ++a) {
    const double shift = model.mhz_per_tesla() * std::abs(dot(B, model.axes[a]));
    out[2 * a] = {model.zero_field_splitting_mhz - shift, a, Branch::lower};
    out[2 * a + 1] = {model.zero_field_splitting_mhz + shift, a, Branch::upper};
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Resonance& x, const Resonance& y) { return x.f_mhz < y.f_mhz; });
  return out;
}

double sensing_resonance(Vec3 B, const NVModel& model) {
  const double shift = model.mhz_per_tesla() * std::abs(dot(B, model.axis()));
  return model.zero_field_splitting_mhz + static_cast<int>(model.branch) * shift;
}

double lorentzian_pv(double f_mw, double f0, const NVModel& model) {
  const double x = f_mw - f0;
  const double g2 = model.linewidth_mhz * model.linewidth_mhz;
  return 1.0 - model.contrast * g2 / (x * x + g2);
}

double lorentzian_derivative(double f_mw, double f0, const NVModel& model) {
  const double x = f_mw - f0;
  const double g2 = model.linewidth_mhz * model.linewidth_mhz;
  const double den = x * x + g2;
  return model.contrast * g2 * 2.0 * x / (den * den);
}

double demod_response(double f_mw, double f0, const NVModel& model) {
  const double dev = model.fm_deviation_mhz;
  return 0.5 * (lorentzian_pv(f_mw + dev, f0, model) - lorentzian_pv(f_mw - dev, f0, model));
}

double slope_dpvdf(double f_mw, double f0, const NVModel& model) {
  const double dev = model.fm_deviation_mhz;
  return 0.5 * (lorentzian_derivative(f_mw + dev, f0, model) -
                lorentzian_derivative(f_mw - dev, f0, model));
}

std::vector<double> max_slope_detunings(const NVModel& model) {
  const double span = model.fm_deviation_mhz + 5.0 * model.linewidth_mhz;
  const int n = 20000;
  double best_x = 0.0;
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -span + 2.0 * span * i / n;
    const double s = std::abs(slope_dpvdf(x, 0.0, model));
    if (s > best) {
      best = s;
      best_x = x;
    }
  }
  // golden-section refinement within one grid step
  const double h = 2.0 * span / n;
  double lo = best_x - h;
  double hi = best_x + h;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  auto f = [&](double x) { return -std::abs(slope_dpvdf(x, 0.0, model)); };
  for (int it = 0; it < 100; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (f(a) < f(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double x = 0.5 * (lo + hi);
  const double at_x = std::abs(slope_dpvdf(x, 0.0, model));
  if (std::abs(slope_dpvdf(0.0, 0.0, model)) >= at_x * (1.0 - 1e-9)) {
    return {0.0};
  }
  return {-std::abs(x), std::abs(x)};
}

double odmr_intensity(double f_mw, Vec3 B, const NVModel& model) {
  double v = 1.0;
  for (const Resonance& r : resonance_frequencies(B, model)) {
    v -= 1.0 - lorentzian_pv(f_mw, r.f_mhz, model);
  }
  return v;
}

int field_sign(const NVModel& model, Vec3 bias) {
  const int proj_sign = dot(bias, model.axis()) >= 0.0 ? 1 : -1;
  return -static_cast<int>(model.branch) * proj_sign;
}

std::optional<double> field_from_pv(double delta_pv, double slope, const NVModel& model,
                                    double slope_floor, int sign) {
  if (!std::isfinite(slope) || !(std::abs(slope) > slope_floor)) {
    return std::nullopt;
  }
  return sign * delta_pv / slope / model.mhz_per_tesla();
}

double slope_floor(std::span<const double> slopes) {
  std::vector<double> mags;
  mags.reserve(slopes.size());
  for (double s : slopes) {
    if (std::isfinite(s)) {
      mags.push_back(std::abs(s));
    }
  }
  if (mags.empty()) {
    return 0.0;
  }
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
  double median = mags[mid];
  if (mags.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(mags.begin(), mags.begin() + mid));
  }
  return 0.1 * median;
}

}  // namespace nvw
