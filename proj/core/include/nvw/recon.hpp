#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nvw/field_map.hpp"
#include "nvw/lockin_camera.hpp"
#include "nvw/nv_physics.hpp"
#include "nvw/stats.hpp"
#include "nvw/waveforms.hpp"

namespace nvw {

/// Mean pv per pixel over all frames of a stack.
std::vector<double> mean_pv_image(const FrameStack& stack);

/// Per-pixel camera offset in pv units, from an off-resonance, zero-current
/// reference acquisition.
struct OffsetMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> pv;
};

OffsetMap offset_reference(const FrameStack& reference);

struct SlopeMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double f_max_mhz = 0.0;
  int field_sign = 1;
  double slope_floor = 0.0;
  std::vector<double> slope;         // pv codes per MHz
  std::vector<double> f0_mhz;        // per-pixel resonance estimate
  std::vector<double> operating_pv;  // zero-current pv at f_max, offset removed
  std::vector<unsigned char> dead;

  std::size_t pixels() const { return rows * cols; }
  bool is_dead(std::size_t p) const { return dead[p] != 0; }
};

/// Image-mean ODMR curves from a fine scan.
struct OdmrCurve {
  std::vector<double> f_mhz;
  std::vector<double> mean_pv;     // offset removed
  std::vector<double> mean_slope;  // NaN where the fit window does not fit
};

struct CalibrationOptions {
  std::size_t fit_points = 5;  // odd; scan points in each slope fit
  double expected_center_mhz = std::numeric_limits<double>::quiet_NaN();
  std::vector<unsigned char> usable;  // empty: all pixels
  int field_sign = 1;
  double min_slope = 0.05;  // codes per MHz
  double significance = 5.0;
  unsigned workers = 1;
};

struct CalibrationResult {
  SlopeMap slopes;
  OdmrCurve curve;
};

/// `scan_pv[k]` is the per-pixel mean pv at `scan_mhz[k]`. Throws
/// CalibrationFailed when the image-mean slope is not significant.
CalibrationResult calibrate(std::span<const double> scan_mhz,
                            const std::vector<std::vector<double>>& scan_pv, std::size_t rows,
                            std::size_t cols, const OffsetMap& offsets, const NVModel& nv,
                            const CalibrationOptions& options);

/// One stack per scan step, in scan order.
CalibrationResult calibrate(std::span<const FrameStack> stacks, std::span<const double> scan_mhz,
                            const OffsetMap& offsets, const NVModel& nv,
                            const CalibrationOptions& options);

/// Fixed-order running sum of pv over trigger-aligned acquisitions.
class PvAccumulator {
 public:
  /// Throws MismatchError when the stack differs in shape or timing.
  void add(const FrameStack& stack, unsigned workers = 1);

  std::size_t count() const { return count_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t frames() const { return frames_; }
  double fps() const { return fps_; }
  double t0_s() const { return t0_; }
  /// Mean pv, pixel-major.
  double mean(std::size_t pixel, std::size_t frame) const {
    return sum_[pixel * frames_ + frame] / static_cast<double>(count_);
  }

 private:
  std::size_t count_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t frames_ = 0;
  double fps_ = 0.0;
  double f_mod_ = 0.0;
  double mw_ = 0.0;
  double phase_ = 0.0;
  double t0_ = 0.0;
  std::vector<double> sum_;
};

void check_compatible(const FrameStack& a, const FrameStack& b);

struct PixelTimeseries {
  std::vector<double> values_ut;
  double fps = 0.0;
  double t0_s = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t n_averaged = 1;
};

/// Field timeseries for every pixel, pixel-major. Dead pixels hold NaN.
struct FieldSeries {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t frames = 0;
  double fps = 0.0;
  double t0_s = 0.0;
  std::size_t n_averaged = 0;
  std::vector<double> values_ut;
  std::vector<unsigned char> valid;

  std::size_t pixels() const { return rows * cols; }
  std::span<const double> pixel(std::size_t p) const {
    return {values_ut.data() + p * frames, frames};
  }
  PixelTimeseries extract(std::size_t row, std::size_t col) const;
  /// Mean trace over pixels where `mask` is set (and valid).
  std::vector<double> masked_mean(const std::vector<unsigned char>& mask) const;
  /// Per-pixel mean over frames, NaN for dead pixels.
  FieldMap frame_mean(double pitch_um = 0.0, double standoff_um = 0.0) const;
};

/// field = sign * (pv - offset - operating_pv) / slope / (df/dB). Throws
/// Error when `offsets` is null, MismatchError on shape mismatch.
FieldSeries to_field(const PvAccumulator& acc, const SlopeMap& slopes, const OffsetMap* offsets,
                     const NVModel& nv, unsigned workers = 1);
FieldSeries to_field(const FrameStack& stack, const SlopeMap& slopes, const OffsetMap* offsets,
                     const NVModel& nv, unsigned workers = 1);

/// Trigger-aligned mean of N acquisitions. Throws MismatchError for an
/// empty list or inconsistent stacks.
FieldSeries average_acquisitions(std::span<const FrameStack> stacks, const SlopeMap& slopes,
                                 const OffsetMap* offsets, const NVModel& nv,
                                 unsigned workers = 1);

struct AmplitudeSpectrum {
  std::vector<double> freq_hz;
  std::vector<double> amplitude;  // same unit as the input
  double resolution_hz = 0.0;

  /// Amplitude in the bin nearest to `f_hz`.
  double at(double f_hz) const;
  /// Frequency of the largest non-DC bin.
  double peak_hz() const;
};

/// Single-sided amplitude spectrum of a uniformly sampled series, mean
/// removed; a pure bin-centered tone of amplitude A reads A.
AmplitudeSpectrum spectrum(std::span<const double> values, double fps);
AmplitudeSpectrum spectrum(const PixelTimeseries& ts);

/// Mean of per-pixel amplitude spectra over pixels where `mask` is set.
AmplitudeSpectrum average_spectrum(const FieldSeries& series,
                                   const std::vector<unsigned char>& mask);

/// Least-squares line through amplitude vs current. Throws InvalidArgument
/// for fewer than 3 currents or when all currents are equal.
LineFit ac_linearity(std::span<const double> currents_a, std::span<const double> amplitudes);

struct PulseWindow {
  double period_ms = 20.0;
  double fwd_ms = 1.0;
  double rev_ms = 1.0;
  double analysis_start_ms = 20.0;
  double analysis_end_ms = std::numeric_limits<double>::infinity();
};

struct PulseMetrics {
  double amplitude_ut = 0.0;
  double noise_ut = 0.0;  // standard error of the amplitude
  double snr = 0.0;       // |amplitude| / noise
  std::size_t pulses = 0;
  std::size_t pulse_frames = 0;
  std::size_t quiet_frames = 0;
};

/// Frames lying fully inside the forward pulse vs fully inside the quiet
/// part of each period. Only periods that fit completely inside the analysis
/// window (clipped to the acquisition) are used.
struct PulseFrames {
  std::vector<std::size_t> pulse;
  std::vector<std::size_t> quiet;
  std::size_t pulses = 0;
};

PulseFrames classify_pulse_frames(std::size_t frames, double fps, const PulseWindow& window);

PulseMetrics pulse_metrics(std::span<const double> values_ut, double fps,
                           const PulseWindow& window);
PulseMetrics pulse_metrics(const PixelTimeseries& ts, const PulseWindow& window);

struct PulseMaps {
  FieldMap signal;
  FieldMap noise;
};

PulseMaps pulse_maps(const FieldSeries& series, const PulseWindow& window, double pitch_um = 0.0,
                     double standoff_um = 0.0);

struct SnrMaskedMap {
  FieldMap signal;
  FieldMap noise;
  FieldMap masked;  // signal where included, 0 elsewhere
  std::vector<unsigned char> mask;
  double threshold = 3.0;
  std::size_t included = 0;
};

/// Includes pixels with |signal| / noise > threshold. Non-finite values and
/// zero noise are excluded.
SnrMaskedMap snr_mask(const FieldMap& signal, const FieldMap& noise, double threshold = 3.0);

struct QuietWindow {
  double start_ms = 0.0;
  double end_ms = 0.0;
};

/// Frames fully inside any window. Throws InvalidArgument for fewer than 3.
std::vector<std::size_t> quiet_frames(std::size_t frames, double fps,
                                      std::span<const QuietWindow> windows);

/// Throws InvalidArgument if a window overlaps any pulse of the train.
void check_quiet_windows(std::span<const QuietWindow> windows, const PulseParams& pulses);

/// Per-pixel standard deviation over the given frames (NaN for dead pixels).
std::vector<double> pixel_noise(const FieldSeries& series, std::span<const std::size_t> frames);

struct NoiseStats {
  std::vector<std::size_t> n;
  std::vector<double> std_ut;  // all-pixel mean of per-pixel std
  std::vector<double> pixel_std_ut;  // at the largest N
  Histogram histogram;
  double mode_ut = 0.0;
  double skewness = 0.0;
  std::size_t modes = 0;
  double sensitivity_nt_rthz = 0.0;  // std / sqrt(fps / 2) at the largest N
};

/// Accumulates acquisitions and records noise at the requested N values
/// (every N when `checkpoints` is empty).
class NoiseTracker {
 public:
  NoiseTracker(SlopeMap slopes, OffsetMap offsets, NVModel nv, std::vector<QuietWindow> windows,
               std::vector<std::size_t> checkpoints = {}, std::vector<unsigned char> usable = {});

  void add(const FrameStack& stack, unsigned workers = 1);

  const PvAccumulator& accumulator() const { return acc_; }
  NoiseStats result() const;

 private:
  SlopeMap slopes_;
  OffsetMap offsets_;
  NVModel nv_;
  std::vector<QuietWindow> windows_;
  std::vector<std::size_t> checkpoints_;
  std::vector<unsigned char> usable_;
  PvAccumulator acc_;
  NoiseStats stats_;
  double fps_ = 0.0;
};

NoiseStats noise_stats(std::span<const FrameStack> stacks, const SlopeMap& slopes,
                       const OffsetMap* offsets, const NVModel& nv,
                       std::vector<QuietWindow> windows, std::vector<std::size_t> checkpoints = {},
                       std::vector<unsigned char> usable = {}, unsigned workers = 1);

}  // namespace nvw
