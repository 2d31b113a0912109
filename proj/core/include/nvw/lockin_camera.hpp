#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nvw/field_map.hpp"
#include "nvw/grid.hpp"
#include "nvw/nv_physics.hpp"
#include "nvw/waveforms.hpp"

namespace nvw {

inline constexpr int kMaxCode = 1023;

struct AcquisitionConfig {
  double fps = 650.0;
  double f_mod_hz = 2600.0;
  std::size_t frames_per_acq = 500;
  std::size_t n_acquisitions = 1;
  double photons_per_pixel_per_frame = 1.66e6;
  double trigger_phase_rad = 0.0;
  std::uint64_t seed = 0;
  std::size_t samples_per_half_period = 8;
  double mw_frequency_mhz = 2870.0;
  double acquisition_gap_s = 8.0;  // transfer dead time, timestamps only

  /// Throws ConfigError.
  void validate() const;

  double duration_s() const { return static_cast<double>(frames_per_acq) / fps; }
  /// Whole modulation periods integrated in each frame.
  std::size_t periods_per_frame() const;
  /// Integrated fraction of each frame period.
  double window_fraction() const;
  std::size_t samples_per_frame() const {
    return periods_per_frame() * 2 * samples_per_half_period;
  }
  double acquisition_start_s(std::size_t k) const {
    return static_cast<double>(k) * (duration_s() + acquisition_gap_s);
  }
};

/// Loss of modulation sync at high rates: linear roll-off above a threshold.
struct DesyncModel {
  bool enabled = false;
  double threshold_hz = 3000.0;
  double rolloff_per_khz = 0.05;
};

double desync_attenuation(double f_mod_hz, const DesyncModel& model);

/// Mean photons per frame for an optical power per pixel.
double photon_budget_from_power(double power_w, double wavelength_nm, double frame_period_s);

/// Quantized lock-in output of one acquisition. Codes are stored
/// frame-major: index = frame * rows * cols + pixel.
struct FrameStack {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t frames = 0;
  double fps = 0.0;
  double f_mod_hz = 0.0;
  double mw_frequency_mhz = 0.0;
  double trigger_phase_rad = 0.0;
  double t0_s = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t acquisition = 0;
  std::vector<std::int16_t> i_codes;
  std::vector<std::int16_t> q_codes;

  std::size_t pixels() const { return rows * cols; }
  std::int16_t i(std::size_t frame, std::size_t pixel) const {
    return i_codes[frame * pixels() + pixel];
  }
  std::int16_t q(std::size_t frame, std::size_t pixel) const {
    return q_codes[frame * pixels() + pixel];
  }
  double pv(std::size_t frame, std::size_t pixel) const;
};

/// sqrt(I^2 + Q^2) clamped to the 10-bit full scale.
double pv_amplitude(double i, double q);

/// Projected field provider: B(pixel, t) = coupling[pixel] * drive(t), in
/// tesla, t in seconds from the acquisition trigger.
struct Scene {
  std::vector<double> coupling_t;
  std::function<double(double)> drive;
  bool is_static = false;

  double field_t(std::size_t pixel, double t) const { return coupling_t[pixel] * drive(t); }

  static Scene zero(std::size_t pixels);
  /// `per_amp` holds the projected field in uT per ampere.
  static Scene from_waveform(const FieldMap& per_amp, const Waveform& waveform);
};

struct CameraModel {
  PixelGrid grid;
  Vec3 bias_t{1e-3, 0.5e-3, 4e-3};
  double f0_scatter_mhz = 0.1;
  double illumination_ratio = 1.0;  // brightest / dimmest column
  double gain_codes = 12000.0;      // codes per unit demodulated contrast at the reference budget
  double gain_reference_photons = 0.0;  // 0: use each acquisition's own budget
  double offset_i_min = 480.0;
  double offset_i_max = 544.0;
  double offset_q_min = 32.0;
  double offset_q_max = 64.0;
  DesyncModel desync;
  double fixed_pattern_noise_codes = 0.0;  // frame-locked noise that does not average out
  bool shot_noise = true;
  double gaussian_threshold = 1000.0;  // photons per sample
  std::uint64_t seed = 0;

  void validate() const;
};

class LockinCamera;

/// Per-pixel frame expectations for one scene/acquisition setup, reusable
/// across trigger-aligned acquisitions.
class PreparedScene {
 public:
  const AcquisitionConfig& config() const { return acq_; }
  bool cached() const { return !aggregates_.empty(); }
  std::size_t unique_frames() const { return signatures_.size(); }

 private:
  friend class LockinCamera;

  struct Signature {
    std::vector<double> drive;
    std::vector<signed char> ref_i;
    std::vector<signed char> ref_q;
    std::vector<signed char> fm;
  };

  AcquisitionConfig acq_;
  Scene scene_;
  std::vector<Signature> signatures_;
  std::vector<std::size_t> frame_signature_;
  std::vector<float> aggregates_;  // pixel-major, 4 per signature: I, Q, var, cov
};

class LockinCamera {
 public:
  LockinCamera(CameraModel model, NVModel nv);

  const CameraModel& model() const { return model_; }
  const NVModel& nv() const { return nv_; }
  std::size_t pixels() const { return model_.grid.size(); }

  double illumination(std::size_t pixel) const { return illumination_[pixel]; }
  double f0_offset_mhz(std::size_t pixel) const { return f0_offset_[pixel]; }
  double offset_i(std::size_t pixel) const { return offset_i_[pixel]; }
  double offset_q(std::size_t pixel) const { return offset_q_[pixel]; }

  /// Unperturbed sensing resonance (bias only, no scatter).
  double center_frequency_mhz() const;
  /// Sensing resonance of a pixel with projected circuit field `field_t`.
  double resonance_mhz(std::size_t pixel, double field_t) const;

  /// Codes per demodulated photon.
  double code_gain(const AcquisitionConfig& acq) const;

  /// Noise-free, unquantized (I, Q) codes for a constant circuit field.
  std::pair<double, double> expected_iq(std::size_t pixel, const AcquisitionConfig& acq,
                                        double field_t = 0.0) const;

  /// Analytic d pv / d f_mw in codes per MHz for a constant circuit field.
  double expected_slope_codes(std::size_t pixel, const AcquisitionConfig& acq,
                              double field_t = 0.0) const;

  /// Expected non-lock-in photon counts per frame (all eight resonances).
  std::vector<double> intensity_image(double f_mw_mhz, double photons_per_frame) const;

  /// Caches frame expectations unless they would exceed `cache_limit_bytes`.
  PreparedScene prepare(const Scene& scene, const AcquisitionConfig& acq, unsigned workers = 1,
                        std::size_t cache_limit_bytes = std::size_t{1} << 30) const;

  FrameStack synthesize(const PreparedScene& prepared, std::uint64_t acquisition,
                        unsigned workers = 1) const;

  FrameStack synthesize_acquisition(const Scene& scene, const AcquisitionConfig& acq,
                                    std::uint64_t acquisition, unsigned workers = 1) const;

 private:
  void pixel_aggregates(const PreparedScene& prepared, std::size_t pixel, float* out) const;
  double per_sample_base(const AcquisitionConfig& acq, std::size_t pixel) const;

  CameraModel model_;
  NVModel nv_;
  std::vector<double> illumination_;
  std::vector<double> f0_offset_;
  std::vector<double> offset_i_;
  std::vector<double> offset_q_;
};

}  // namespace nvw
