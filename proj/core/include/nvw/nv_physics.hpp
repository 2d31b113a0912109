#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "nvw/vec3.hpp"

namespace nvw {

enum class Branch { lower = -1, upper = +1 };

struct NVModel {
  double zero_field_splitting_mhz = 2870.0;
  double gyro_hz_per_nt = 28.0;
  std::array<Vec3, 4> axes;
  std::size_t sensing_axis = 0;
  double contrast = 0.014;
  double linewidth_mhz = 0.5;  // HWHM
  double fm_deviation_mhz = 4.0;
  Branch branch = Branch::lower;

  NVModel();

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;

  /// Resonance shift per tesla of axial field, in MHz/T.
  double mhz_per_tesla() const { return gyro_hz_per_nt * 1e3; }

  Vec3 axis() const { return axes[sensing_axis]; }
};

struct Resonance {
  double f_mhz;
  std::size_t axis;
  Branch branch;
};

/// All eight resonances, sorted by frequency (ties broken by axis, branch).
std::array<Resonance, 8> resonance_frequencies(Vec3 B, const NVModel& model);

/// Resonance frequency of the sensing axis / branch for a total field B.
double sensing_resonance(Vec3 B, const NVModel& model);

double lorentzian_pv(double f_mw, double f0, const NVModel& model);
double lorentzian_derivative(double f_mw, double f0, const NVModel& model);

/// Square-wave FM lock-in response: [L(f+dev) - L(f-dev)] / 2.
double demod_response(double f_mw, double f0, const NVModel& model);

/// d demod_response / d f_mw, per MHz.
double slope_dpvdf(double f_mw, double f0, const NVModel& model);

/// Detunings (f_mw - f0) where |slope_dpvdf| is largest. One value (0) when
/// the maximum is at the center, otherwise the symmetric pair.
std::vector<double> max_slope_detunings(const NVModel& model);

/// Fluorescence with all eight resonances as independent dips, normalized to
/// 1 far off resonance.
double odmr_intensity(double f_mw, Vec3 B, const NVModel& model);

/// Sign relating a positive demodulated-value shift to a positive projected
/// field: +1 when the tracked resonance moves down with field.
int field_sign(const NVModel& model, Vec3 bias);

/// delta_pv / slope / (df/dB) in tesla, times `sign`. Returns nullopt when
/// |slope| <= slope_floor (dead pixel).
std::optional<double> field_from_pv(double delta_pv, double slope, const NVModel& model,
                                    double slope_floor = 0.0, int sign = +1);

/// 10% of the median |slope| over finite entries.
double slope_floor(std::span<const double> slopes);

}  // namespace nvw
