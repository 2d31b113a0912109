#include "nvw/recon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <string>

#include "nvw/errors.hpp"
#include "nvw/parallel.hpp"

namespace nvw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTimeEps = 1e-9;  // ms

std::string range_text(std::span<const double> scan) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f-%.3f MHz", scan.front(), scan.back());
  return buf;
}

// Windowed least-squares slope weights for one window center.
struct FitWindow {
  std::size_t first = 0;
  std::size_t count = 0;
  double x_mean = 0.0;
  double x_center = 0.0;
  std::vector<double> weights;  // slope = sum w_j y_j
};

FitWindow make_window(std::span<const double> x, std::size_t center, std::size_t half) {
  FitWindow w;
  w.first = center - half;
  w.count = 2 * half + 1;
  w.x_center = x[center];
  for (std::size_t j = 0; j < w.count; ++j) {
    w.x_mean += x[w.first + j];
  }
  w.x_mean /= static_cast<double>(w.count);
  double sxx = 0.0;
  for (std::size_t j = 0; j < w.count; ++j) {
    const double d = x[w.first + j] - w.x_mean;
    sxx += d * d;
  }
  w.weights.resize(w.count);
  for (std::size_t j = 0; j < w.count; ++j) {
    w.weights[j] = (x[w.first + j] - w.x_mean) / sxx;
  }
  return w;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// Single-sided amplitudes of `values` with the mean removed.
  void amplitudes(std::span<const double> values, std::vector<double>& out) {
    const double m = mean(values);
    for (std::size_t i = 0; i < n_; ++i) {
      in_[i] = values[i] - m;
    }
    fftw_execute(plan_);
    const std::size_t bins = n_ / 2 + 1;
    out.resize(bins);
    const double nn = static_cast<double>(n_);
    for (std::size_t k = 0; k < bins; ++k) {
      const double mag = std::hypot(out_[k][0], out_[k][1]);
      const bool edge = k == 0 || (n_ % 2 == 0 && k == n_ / 2);
      out[k] = (edge ? 1.0 : 2.0) * mag / nn;
    }
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

bool included(const std::vector<unsigned char>& usable, std::size_t p) {
  return usable.empty() || usable[p] != 0;
}

double field_ut(double pv, std::size_t p, const SlopeMap& slopes, const OffsetMap& offsets,
                const NVModel& nv) {
  const auto b = field_from_pv(pv - offsets.pv[p] - slopes.operating_pv[p], slopes.slope[p], nv,
                               0.0, slopes.field_sign);
  return b ? *b * 1e6 : kNaN;
}

void check_field_inputs(std::size_t rows, std::size_t cols, const SlopeMap& slopes,
                        const OffsetMap* offsets) {
  if (offsets == nullptr) {
    throw Error("missing offset reference");
  }
  if (slopes.rows != rows || slopes.cols != cols) {
    throw MismatchError("slope map is " + std::to_string(slopes.rows) + "x" +
                        std::to_string(slopes.cols) + " but the stacks are " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (offsets->rows != rows || offsets->cols != cols) {
    throw MismatchError("offset reference does not match the stack dimensions");
  }
}

}  // namespace

std::vector<double> mean_pv_image(const FrameStack& stack) {
  const std::size_t n = stack.pixels();
  std::vector<double> out(n, 0.0);
  if (stack.frames == 0) {
    return out;
  }
  for (std::size_t f = 0; f < stack.frames; ++f) {
    for (std::size_t p = 0; p < n; ++p) {
      out[p] += stack.pv(f, p);
    }
  }
  for (double& v : out) {
    v /= static_cast<double>(stack.frames);
  }
  return out;
}

OffsetMap offset_reference(const FrameStack& reference) {
  return {reference.rows, reference.cols, mean_pv_image(reference)};
}

CalibrationResult calibrate(std::span<const double> scan_mhz,
                            const std::vector<std::vector<double>>& scan_pv, std::size_t rows,
                            std::size_t cols, const OffsetMap& offsets, const NVModel& nv,
                            const CalibrationOptions& options) {
  const std::size_t k_steps = scan_mhz.size();
  const std::size_t n = rows * cols;
  if (k_steps < 5) {
    throw InvalidArgument("calibration needs at least 5 scan steps");
  }
  if (scan_pv.size() != k_steps) {
    throw MismatchError("scan images do not match the scan frequencies");
  }
  for (std::size_t k = 0; k < k_steps; ++k) {
    if (k > 0 && !(scan_mhz[k] > scan_mhz[k - 1])) {
      throw InvalidArgument("scan frequencies must be strictly increasing");
    }
    if (scan_pv[k].size() != n) {
      throw MismatchError("scan image size does not match rows*cols");
    }
  }
  if (offsets.rows != rows || offsets.cols != cols) {
    throw MismatchError("offset reference does not match the scan dimensions");
  }
  if (!options.usable.empty() && options.usable.size() != n) {
    throw MismatchError("usable mask does not match the scan dimensions");
  }

  std::size_t width = std::min(options.fit_points, k_steps);
  if (width % 2 == 0) {
    --width;
  }
  if (width < 3) {
    throw InvalidArgument("slope fit needs at least 3 points");
  }
  const std::size_t half = width / 2;
  const std::size_t c_first = half;
  const std::size_t c_count = k_steps - 2 * half;
  std::vector<FitWindow> windows;
  windows.reserve(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    windows.push_back(make_window(scan_mhz, c_first + c, half));
  }

  // per-pixel slope at every window center
  std::vector<double> slopes(n * c_count, 0.0);
  std::vector<unsigned char> use(n, 0);
  parallel_for(n, options.workers, [&](std::size_t p0, std::size_t p1) {
    for (std::size_t p = p0; p < p1; ++p) {
      bool finite = included(options.usable, p);
      for (std::size_t c = 0; c < c_count && finite; ++c) {
        const FitWindow& w = windows[c];
        double s = 0.0;
        for (std::size_t j = 0; j < w.count; ++j) {
          s += w.weights[j] * scan_pv[w.first + j][p];
        }
        slopes[p * c_count + c] = s;
        finite = std::isfinite(s);
      }
      use[p] = finite ? 1 : 0;
    }
  });

  std::size_t n_use = 0;
  for (unsigned char u : use) {
    n_use += u;
  }
  if (n_use == 0) {
    throw CalibrationFailed("no usable pixels in scan " + range_text(scan_mhz));
  }

  CalibrationResult result;
  OdmrCurve& curve = result.curve;
  curve.f_mhz.assign(scan_mhz.begin(), scan_mhz.end());
  curve.mean_pv.assign(k_steps, 0.0);
  curve.mean_slope.assign(k_steps, kNaN);
  std::vector<double> mean_abs(c_count, 0.0);
  std::vector<double> mean_signed(c_count, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (!use[p]) {
      continue;
    }
    for (std::size_t k = 0; k < k_steps; ++k) {
      curve.mean_pv[k] += scan_pv[k][p] - offsets.pv[p];
    }
    for (std::size_t c = 0; c < c_count; ++c) {
      mean_abs[c] += std::abs(slopes[p * c_count + c]);
      mean_signed[c] += slopes[p * c_count + c];
    }
  }
  for (double& v : curve.mean_pv) {
    v /= static_cast<double>(n_use);
  }
  for (std::size_t c = 0; c < c_count; ++c) {
    mean_abs[c] /= static_cast<double>(n_use);
    curve.mean_slope[c_first + c] = mean_signed[c] / static_cast<double>(n_use);
  }

  const std::size_t best =
      static_cast<std::size_t>(std::max_element(mean_abs.begin(), mean_abs.end()) - mean_abs.begin());
  const FitWindow& bw = windows[best];

  // significance of the image-mean slope at the chosen point
  {
    std::vector<double> xs(scan_mhz.begin() + bw.first, scan_mhz.begin() + bw.first + bw.count);
    std::vector<double> ys(curve.mean_pv.begin() + bw.first,
                           curve.mean_pv.begin() + bw.first + bw.count);
    const LineFit fit = fit_line(xs, ys);
    const double s = std::abs(fit.slope);
    if (!std::isfinite(s) || !(s > options.significance * fit.slope_se) ||
        s < options.min_slope) {
      throw CalibrationFailed("no significant ODMR slope in scan " + range_text(scan_mhz));
    }
  }

  SlopeMap& map = result.slopes;
  map.rows = rows;
  map.cols = cols;
  map.f_max_mhz = bw.x_center;
  map.field_sign = options.field_sign;
  map.slope.assign(n, kNaN);
  map.f0_mhz.assign(n, kNaN);
  map.operating_pv.assign(n, kNaN);
  map.dead.assign(n, 1);

  const std::vector<double> detunings = max_slope_detunings(nv);
  std::vector<double> used_slopes;
  used_slopes.reserve(n_use);
  for (std::size_t p = 0; p < n; ++p) {
    if (!use[p]) {
      continue;
    }
    const double* sp = slopes.data() + p * c_count;
    map.slope[p] = sp[best];
    used_slopes.push_back(sp[best]);

    double ybar = 0.0;
    for (std::size_t j = 0; j < bw.count; ++j) {
      ybar += scan_pv[bw.first + j][p];
    }
    ybar /= static_cast<double>(bw.count);
    map.operating_pv[p] = ybar + sp[best] * (bw.x_center - bw.x_mean) - offsets.pv[p];

    std::size_t peak = 0;
    for (std::size_t c = 1; c < c_count; ++c) {
      if (std::abs(sp[c]) > std::abs(sp[peak])) {
        peak = c;
      }
    }
    double f_peak = windows[peak].x_center;
    if (peak > 0 && peak + 1 < c_count) {
      const double a = std::abs(sp[peak - 1]);
      const double b = std::abs(sp[peak]);
      const double cc = std::abs(sp[peak + 1]);
      const double den = a - 2.0 * b + cc;
      if (den < 0.0) {
        const double off = std::clamp(0.5 * (a - cc) / den, -0.5, 0.5);
        const double step = 0.5 * (windows[peak + 1].x_center - windows[peak - 1].x_center);
        f_peak += off * step;
      }
    }
    double f0 = f_peak - detunings.front();
    if (std::isfinite(options.expected_center_mhz)) {
      for (double d : detunings) {
        if (std::abs(f_peak - d - options.expected_center_mhz) <
            std::abs(f0 - options.expected_center_mhz)) {
          f0 = f_peak - d;
        }
      }
    }
    map.f0_mhz[p] = f0;
  }
  map.slope_floor = slope_floor(used_slopes);
  for (std::size_t p = 0; p < n; ++p) {
    if (use[p] && std::abs(map.slope[p]) > map.slope_floor) {
      map.dead[p] = 0;
    }
  }
  return result;
}

CalibrationResult calibrate(std::span<const FrameStack> stacks, std::span<const double> scan_mhz,
                            const OffsetMap& offsets, const NVModel& nv,
                            const CalibrationOptions& options) {
  if (stacks.size() != scan_mhz.size()) {
    throw MismatchError("one stack per scan frequency is required");
  }
  if (stacks.empty()) {
    throw MismatchError("no calibration stacks");
  }
  std::vector<std::vector<double>> images;
  images.reserve(stacks.size());
  for (const FrameStack& s : stacks) {
    if (s.rows != stacks.front().rows || s.cols != stacks.front().cols) {
      throw MismatchError("calibration stacks differ in size");
    }
    images.push_back(mean_pv_image(s));
  }
  return calibrate(scan_mhz, images, stacks.front().rows, stacks.front().cols, offsets, nv,
                   options);
}

void check_compatible(const FrameStack& a, const FrameStack& b) {
  if (a.rows != b.rows || a.cols != b.cols || a.frames != b.frames) {
    throw MismatchError("stacks differ in shape");
  }
  if (a.fps != b.fps || a.f_mod_hz != b.f_mod_hz) {
    throw MismatchError("stacks differ in frame rate or modulation frequency");
  }
  if (a.mw_frequency_mhz != b.mw_frequency_mhz) {
    throw MismatchError("stacks differ in microwave frequency");
  }
  if (a.trigger_phase_rad != b.trigger_phase_rad) {
    throw MismatchError("stacks differ in trigger phase");
  }
}

void PvAccumulator::add(const FrameStack& stack, unsigned workers) {
  if (count_ == 0) {
    rows_ = stack.rows;
    cols_ = stack.cols;
    frames_ = stack.frames;
    fps_ = stack.fps;
    f_mod_ = stack.f_mod_hz;
    mw_ = stack.mw_frequency_mhz;
    phase_ = stack.trigger_phase_rad;
    t0_ = stack.t0_s;
    sum_.assign(rows_ * cols_ * frames_, 0.0);
  } else {
    FrameStack shape;
    shape.rows = rows_;
    shape.cols = cols_;
    shape.frames = frames_;
    shape.fps = fps_;
    shape.f_mod_hz = f_mod_;
    shape.mw_frequency_mhz = mw_;
    shape.trigger_phase_rad = phase_;
    check_compatible(shape, stack);
  }
  const std::size_t n = rows_ * cols_;
  parallel_for(n, workers, [&](std::size_t p0, std::size_t p1) {
    for (std::size_t p = p0; p < p1; ++p) {
      double* dst = sum_.data() + p * frames_;
      for (std::size_t f = 0; f < frames_; ++f) {
        dst[f] += stack.pv(f, p);
      }
    }
  });
  ++count_;
}

PixelTimeseries FieldSeries::extract(std::size_t row, std::size_t col) const {
  PixelTimeseries ts;
  const std::size_t p = row * cols + col;
  const auto v = pixel(p);
  ts.values_ut.assign(v.begin(), v.end());
  ts.fps = fps;
  ts.t0_s = t0_s;
  ts.row = row;
  ts.col = col;
  ts.n_averaged = n_averaged;
  return ts;
}

std::vector<double> FieldSeries::masked_mean(const std::vector<unsigned char>& mask) const {
  std::vector<double> out(frames, 0.0);
  std::size_t count = 0;
  for (std::size_t p = 0; p < pixels(); ++p) {
    if (!valid[p] || (!mask.empty() && !mask[p])) {
      continue;
    }
    const auto v = pixel(p);
    for (std::size_t f = 0; f < frames; ++f) {
      out[f] += v[f];
    }
    ++count;
  }
  for (double& v : out) {
    v = count > 0 ? v / static_cast<double>(count) : kNaN;
  }
  return out;
}

FieldMap FieldSeries::frame_mean(double pitch_um, double standoff_um) const {
  FieldMap map;
  map.rows = rows;
  map.cols = cols;
  map.pitch_um = pitch_um;
  map.standoff_um = standoff_um;
  map.values.assign(pixels(), kNaN);
  for (std::size_t p = 0; p < pixels(); ++p) {
    if (valid[p]) {
      map.values[p] = mean(pixel(p));
    }
  }
  return map;
}

FieldSeries to_field(const PvAccumulator& acc, const SlopeMap& slopes, const OffsetMap* offsets,
                     const NVModel& nv, unsigned workers) {
  if (acc.count() == 0) {
    throw MismatchError("no acquisitions to convert");
  }
  check_field_inputs(acc.rows(), acc.cols(), slopes, offsets);
  FieldSeries out;
  out.rows = acc.rows();
  out.cols = acc.cols();
  out.frames = acc.frames();
  out.fps = acc.fps();
  out.t0_s = acc.t0_s();
  out.n_averaged = acc.count();
  out.values_ut.assign(out.pixels() * out.frames, kNaN);
  out.valid.assign(out.pixels(), 0);
  parallel_for(out.pixels(), workers, [&](std::size_t p0, std::size_t p1) {
    for (std::size_t p = p0; p < p1; ++p) {
      if (slopes.is_dead(p)) {
        continue;
      }
      out.valid[p] = 1;
      double* dst = out.values_ut.data() + p * out.frames;
      for (std::size_t f = 0; f < out.frames; ++f) {
        dst[f] = field_ut(acc.mean(p, f), p, slopes, *offsets, nv);
      }
    }
  });
  return out;
}

FieldSeries to_field(const FrameStack& stack, const SlopeMap& slopes, const OffsetMap* offsets,
                     const NVModel& nv, unsigned workers) {
  PvAccumulator acc;
  acc.add(stack, workers);
  return to_field(acc, slopes, offsets, nv, workers);
}

FieldSeries average_acquisitions(std::span<const FrameStack> stacks, const SlopeMap& slopes,
                                 const OffsetMap* offsets, const NVModel& nv, unsigned workers) {
  if (stacks.empty()) {
    throw MismatchError("empty stack list");
  }
  PvAccumulator acc;
  for (const FrameStack& s : stacks) {
    acc.add(s, workers);
  }
  return to_field(acc, slopes, offsets, nv, workers);
}

double AmplitudeSpectrum::at(double f_hz) const {
  if (amplitude.empty()) {
    return kNaN;
  }
  const auto k = static_cast<std::size_t>(std::lround(f_hz / resolution_hz));
  return amplitude[std::min(k, amplitude.size() - 1)];
}

double AmplitudeSpectrum::peak_hz() const {
  std::size_t best = 1;
  for (std::size_t k = 1; k < amplitude.size(); ++k) {
    if (amplitude[k] > amplitude[best]) {
      best = k;
    }
  }
  return best < freq_hz.size() ? freq_hz[best] : kNaN;
}

AmplitudeSpectrum spectrum(std::span<const double> values, double fps) {
  if (values.size() < 2 || !(fps > 0.0)) {
    throw InvalidArgument("spectrum needs at least 2 samples and a positive rate");
  }
  AmplitudeSpectrum s;
  const std::size_t n = values.size();
  s.resolution_hz = fps / static_cast<double>(n);
  RealFft fft(n);
  fft.amplitudes(values, s.amplitude);
  s.freq_hz.resize(s.amplitude.size());
  for (std::size_t k = 0; k < s.freq_hz.size(); ++k) {
    s.freq_hz[k] = static_cast<double>(k) * s.resolution_hz;
  }
  return s;
}

AmplitudeSpectrum spectrum(const PixelTimeseries& ts) { return spectrum(ts.values_ut, ts.fps); }

AmplitudeSpectrum average_spectrum(const FieldSeries& series,
                                   const std::vector<unsigned char>& mask) {
  if (series.frames < 2) {
    throw InvalidArgument("spectrum needs at least 2 frames");
  }
  AmplitudeSpectrum s;
  s.resolution_hz = series.fps / static_cast<double>(series.frames);
  RealFft fft(series.frames);
  std::vector<double> one;
  std::size_t count = 0;
  for (std::size_t p = 0; p < series.pixels(); ++p) {
    if (!series.valid[p] || (!mask.empty() && !mask[p])) {
      continue;
    }
    fft.amplitudes(series.pixel(p), one);
    if (s.amplitude.empty()) {
      s.amplitude.assign(one.size(), 0.0);
    }
    for (std::size_t k = 0; k < one.size(); ++k) {
      s.amplitude[k] += one[k];
    }
    ++count;
  }
  if (count == 0) {
    s.amplitude.assign(series.frames / 2 + 1, kNaN);
  } else {
    for (double& a : s.amplitude) {
      a /= static_cast<double>(count);
    }
  }
  s.freq_hz.resize(s.amplitude.size());
  for (std::size_t k = 0; k < s.freq_hz.size(); ++k) {
    s.freq_hz[k] = static_cast<double>(k) * s.resolution_hz;
  }
  return s;
}

LineFit ac_linearity(std::span<const double> currents_a, std::span<const double> amplitudes) {
  if (currents_a.size() < 3 || currents_a.size() != amplitudes.size()) {
    throw InvalidArgument("linearity fit needs at least 3 currents");
  }
  if (std::all_of(currents_a.begin(), currents_a.end(),
                  [&](double c) { return c == currents_a.front(); })) {
    throw InvalidArgument("linearity fit is degenerate: all currents are equal");
  }
  return fit_line(currents_a, amplitudes);
}

PulseFrames classify_pulse_frames(std::size_t frames, double fps, const PulseWindow& window) {
  const double period = window.period_ms;
  if (!(period > 0.0) || !(window.fwd_ms > 0.0) || !(window.rev_ms >= 0.0) ||
      window.fwd_ms + window.rev_ms > period) {
    throw InvalidArgument("invalid pulse timing");
  }
  const double duration_ms = static_cast<double>(frames) / fps * 1e3;
  const double start = std::max(0.0, window.analysis_start_ms);
  const double end = std::min(duration_ms, window.analysis_end_ms);
  if (period > end - start + kTimeEps) {
    throw InvalidArgument("pulse period exceeds the analysis window");
  }
  PulseFrames out;
  std::vector<unsigned char> has_pulse;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t0 = static_cast<double>(f) / fps * 1e3;
    const double t1 = static_cast<double>(f + 1) / fps * 1e3;
    const double k = std::floor((t0 + kTimeEps) / period);
    const double p_start = k * period;
    const double p_end = p_start + period;
    if (p_start < start - kTimeEps || p_end > end + kTimeEps) {
      continue;
    }
    const double ph0 = t0 - p_start;
    const double ph1 = t1 - p_start;
    if (ph0 >= -kTimeEps && ph1 <= window.fwd_ms + kTimeEps) {
      out.pulse.push_back(f);
      const auto ki = static_cast<std::size_t>(k);
      if (has_pulse.size() <= ki) {
        has_pulse.resize(ki + 1, 0);
      }
      has_pulse[ki] = 1;
    } else if (ph0 >= window.fwd_ms + window.rev_ms - kTimeEps && ph1 <= period + kTimeEps) {
      out.quiet.push_back(f);
    }
  }
  for (unsigned char h : has_pulse) {
    out.pulses += h;
  }
  return out;
}

PulseMetrics pulse_metrics(std::span<const double> values_ut, double fps,
                           const PulseWindow& window) {
  const PulseFrames frames = classify_pulse_frames(values_ut.size(), fps, window);
  if (frames.pulse.empty() || frames.quiet.size() < 2) {
    throw InvalidArgument("analysis window holds no complete pulse period");
  }
  std::vector<double> in;
  std::vector<double> quiet;
  in.reserve(frames.pulse.size());
  quiet.reserve(frames.quiet.size());
  for (std::size_t f : frames.pulse) {
    in.push_back(values_ut[f]);
  }
  for (std::size_t f : frames.quiet) {
    quiet.push_back(values_ut[f]);
  }
  PulseMetrics m;
  m.pulses = frames.pulses;
  m.pulse_frames = in.size();
  m.quiet_frames = quiet.size();
  m.amplitude_ut = mean(in) - mean(quiet);
  m.noise_ut = stddev(quiet) * std::sqrt(1.0 / static_cast<double>(in.size()) +
                                         1.0 / static_cast<double>(quiet.size()));
  if (m.noise_ut > 0.0) {
    m.snr = std::abs(m.amplitude_ut) / m.noise_ut;
  } else {
    m.snr = m.amplitude_ut != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return m;
}

PulseMetrics pulse_metrics(const PixelTimeseries& ts, const PulseWindow& window) {
  return pulse_metrics(ts.values_ut, ts.fps, window);
}

PulseMaps pulse_maps(const FieldSeries& series, const PulseWindow& window, double pitch_um,
                     double standoff_um) {
  const PulseFrames frames = classify_pulse_frames(series.frames, series.fps, window);
  if (frames.pulse.empty() || frames.quiet.size() < 2) {
    throw InvalidArgument("analysis window holds no complete pulse period");
  }
  PulseMaps maps;
  for (FieldMap* m : {&maps.signal, &maps.noise}) {
    m->rows = series.rows;
    m->cols = series.cols;
    m->pitch_um = pitch_um;
    m->standoff_um = standoff_um;
    m->values.assign(series.pixels(), kNaN);
  }
  std::vector<double> in(frames.pulse.size());
  std::vector<double> quiet(frames.quiet.size());
  const double k =
      std::sqrt(1.0 / static_cast<double>(in.size()) + 1.0 / static_cast<double>(quiet.size()));
  for (std::size_t p = 0; p < series.pixels(); ++p) {
    if (!series.valid[p]) {
      continue;
    }
    const auto v = series.pixel(p);
    for (std::size_t i = 0; i < in.size(); ++i) {
      in[i] = v[frames.pulse[i]];
    }
    for (std::size_t i = 0; i < quiet.size(); ++i) {
      quiet[i] = v[frames.quiet[i]];
    }
    maps.signal.values[p] = mean(in) - mean(quiet);
    maps.noise.values[p] = stddev(quiet) * k;
  }
  return maps;
}

SnrMaskedMap snr_mask(const FieldMap& signal, const FieldMap& noise, double threshold) {
  if (signal.rows != noise.rows || signal.cols != noise.cols ||
      signal.values.size() != noise.values.size()) {
    throw InvalidArgument("signal and noise maps differ in size");
  }
  SnrMaskedMap out;
  out.signal = signal;
  out.noise = noise;
  out.masked = signal;
  out.threshold = threshold;
  out.mask.assign(signal.values.size(), 0);
  for (std::size_t p = 0; p < signal.values.size(); ++p) {
    const double s = signal.values[p];
    const double n = noise.values[p];
    const bool keep = std::isfinite(s) && std::isfinite(n) && n > 0.0 && std::abs(s) / n > threshold;
    out.mask[p] = keep ? 1 : 0;
    out.masked.values[p] = keep ? s : 0.0;
    out.included += keep ? 1 : 0;
  }
  return out;
}

std::vector<std::size_t> quiet_frames(std::size_t frames, double fps,
                                      std::span<const QuietWindow> windows) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t0 = static_cast<double>(f) / fps * 1e3;
    const double t1 = static_cast<double>(f + 1) / fps * 1e3;
    for (const QuietWindow& w : windows) {
      if (t0 >= w.start_ms - kTimeEps && t1 <= w.end_ms + kTimeEps) {
        out.push_back(f);
        break;
      }
    }
  }
  if (out.size() < 3) {
    throw InvalidArgument("quiet window holds fewer than 3 frames");
  }
  return out;
}

void check_quiet_windows(std::span<const QuietWindow> windows, const PulseParams& pulses) {
  const double period = pulses.period_ms;
  const double busy = pulses.fwd_ms + pulses.rev_ms;
  for (const QuietWindow& w : windows) {
    if (!(w.end_ms > w.start_ms)) {
      throw InvalidArgument("quiet window must have positive length");
    }
    const double k0 = std::floor(w.start_ms / period) - 1.0;
    const double k1 = std::floor(w.end_ms / period) + 1.0;
    for (double k = k0; k <= k1; k += 1.0) {
      const double a = k * period;
      const double b = a + busy;
      if (w.start_ms < b - kTimeEps && w.end_ms > a + kTimeEps) {
        throw InvalidArgument("quiet window overlaps a current pulse");
      }
    }
  }
}

std::vector<double> pixel_noise(const FieldSeries& series, std::span<const std::size_t> frames) {
  std::vector<double> out(series.pixels(), kNaN);
  std::vector<double> buf(frames.size());
  for (std::size_t p = 0; p < series.pixels(); ++p) {
    if (!series.valid[p]) {
      continue;
    }
    const auto v = series.pixel(p);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      buf[i] = v[frames[i]];
    }
    out[p] = stddev(buf);
  }
  return out;
}

NoiseTracker::NoiseTracker(SlopeMap slopes, OffsetMap offsets, NVModel nv,
                           std::vector<QuietWindow> windows, std::vector<std::size_t> checkpoints,
                           std::vector<unsigned char> usable)
    : slopes_(std::move(slopes)),
      offsets_(std::move(offsets)),
      nv_(nv),
      windows_(std::move(windows)),
      checkpoints_(std::move(checkpoints)),
      usable_(std::move(usable)) {
  if (windows_.empty()) {
    throw InvalidArgument("noise statistics need at least one quiet window");
  }
}

void NoiseTracker::add(const FrameStack& stack, unsigned workers) {
  check_field_inputs(stack.rows, stack.cols, slopes_, &offsets_);
  acc_.add(stack, workers);
  fps_ = stack.fps;
  const std::size_t n = acc_.count();
  if (!checkpoints_.empty() &&
      std::find(checkpoints_.begin(), checkpoints_.end(), n) == checkpoints_.end()) {
    return;
  }
  const auto frames = quiet_frames(acc_.frames(), acc_.fps(), windows_);
  const std::size_t pixels = acc_.rows() * acc_.cols();
  std::vector<double> per_pixel(pixels, kNaN);
  parallel_for(pixels, workers, [&](std::size_t p0, std::size_t p1) {
    std::vector<double> buf(frames.size());
    for (std::size_t p = p0; p < p1; ++p) {
      if (slopes_.is_dead(p) || !included(usable_, p)) {
        continue;
      }
      for (std::size_t i = 0; i < frames.size(); ++i) {
        buf[i] = field_ut(acc_.mean(p, frames[i]), p, slopes_, offsets_, nv_);
      }
      per_pixel[p] = stddev(buf);
    }
  });
  double sum = 0.0;
  std::size_t count = 0;
  for (double s : per_pixel) {
    if (std::isfinite(s)) {
      sum += s;
      ++count;
    }
  }
  stats_.n.push_back(n);
  stats_.std_ut.push_back(count > 0 ? sum / static_cast<double>(count) : kNaN);
  stats_.pixel_std_ut = std::move(per_pixel);
}

NoiseStats NoiseTracker::result() const {
  NoiseStats out = stats_;
  std::vector<double> finite;
  for (double s : out.pixel_std_ut) {
    if (std::isfinite(s)) {
      finite.push_back(s);
    }
  }
  if (finite.empty()) {
    return out;
  }
  out.histogram = freedman_diaconis(finite);
  out.mode_ut = histogram_mode(out.histogram);
  out.skewness = skewness(finite);
  out.modes = count_modes(out.histogram);
  if (!out.std_ut.empty() && fps_ > 0.0) {
    out.sensitivity_nt_rthz = out.std_ut.back() * 1e3 / std::sqrt(fps_ / 2.0);
  }
  return out;
}

NoiseStats noise_stats(std::span<const FrameStack> stacks, const SlopeMap& slopes,
                       const OffsetMap* offsets, const NVModel& nv,
                       std::vector<QuietWindow> windows, std::vector<std::size_t> checkpoints,
                       std::vector<unsigned char> usable, unsigned workers) {
  if (stacks.empty()) {
    throw MismatchError("empty stack list");
  }
  if (offsets == nullptr) {
    throw Error("missing offset reference");
  }
  NoiseTracker tracker(slopes, *offsets, nv, std::move(windows), std::move(checkpoints),
                       std::move(usable));
  for (const FrameStack& s : stacks) {
    tracker.add(s, workers);
  }
  return tracker.result();
}

}  // namespace nvw
