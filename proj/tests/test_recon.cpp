#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvw/errors.hpp"
#include "nvw/experiment.hpp"
#include "nvw/recon.hpp"

using namespace nvw;

namespace {

CameraModel camera_model(std::size_t rows, std::size_t cols) {
  CameraModel m;
  m.grid.rows = rows;
  m.grid.cols = cols;
  m.seed = 2;
  return m;
}

AcquisitionConfig acq(double fps, double f_mod, std::size_t frames) {
  AcquisitionConfig a;
  a.fps = fps;
  a.f_mod_hz = f_mod;
  a.frames_per_acq = frames;
  a.seed = 8;
  return a;
}

std::vector<double> scan_grid(double center, double half, double step) {
  std::vector<double> f;
  const int n = static_cast<int>(std::lround(half / step));
  for (int k = -n; k <= n; ++k) {
    f.push_back(center + k * step);
  }
  return f;
}

// Noise-free per-pixel pv images along a scan.
std::vector<std::vector<double>> expected_scan(const LockinCamera& cam, AcquisitionConfig a,
                                               std::span<const double> f) {
  std::vector<std::vector<double>> out;
  for (double fk : f) {
    a.mw_frequency_mhz = fk;
    std::vector<double> img(cam.pixels());
    for (std::size_t p = 0; p < cam.pixels(); ++p) {
      const auto [i, q] = cam.expected_iq(p, a);
      img[p] = pv_amplitude(i, q);
    }
    out.push_back(std::move(img));
  }
  return out;
}

FrameStack stack_of(std::size_t rows, std::size_t cols, std::size_t frames, double value) {
  FrameStack s;
  s.rows = rows;
  s.cols = cols;
  s.frames = frames;
  s.fps = 3500.0;
  s.f_mod_hz = 14000.0;
  s.mw_frequency_mhz = 2800.0;
  s.i_codes.assign(rows * cols * frames, static_cast<std::int16_t>(value));
  s.q_codes.assign(rows * cols * frames, 0);
  return s;
}

}  // namespace

TEST(Calibrate, RecoversAnalyticSlopesAndFmax) {
  const NVModel nv;
  const LockinCamera cam(camera_model(3, 4), nv);
  const AcquisitionConfig a = acq(650, 2600, 1);
  const double f_max = cam.center_frequency_mhz() + max_slope_detunings(nv).front();
  // narrow line: the 5-point window must stay inside the slope peak
  const auto f = scan_grid(f_max, 1.0, 0.02);
  const OffsetMap offsets = ideal_offsets(cam, a, 3100.0);
  CalibrationOptions opt;
  opt.expected_center_mhz = cam.center_frequency_mhz();
  const CalibrationResult r =
      calibrate(f, expected_scan(cam, a, f), 3, 4, offsets, nv, opt);
  // the narrow line has two equal slope extrema per dip; either is a valid f_max
  AcquisitionConfig at = a;
  at.mw_frequency_mhz = r.slopes.f_max_mhz;
  AcquisitionConfig analytic = a;
  analytic.mw_frequency_mhz = f_max;
  double s_found = 0.0;
  double s_best = 0.0;
  for (std::size_t p = 0; p < cam.pixels(); ++p) {
    s_found += std::abs(cam.expected_slope_codes(p, at));
    s_best += std::abs(cam.expected_slope_codes(p, analytic));
  }
  EXPECT_GT(s_found, 0.98 * s_best);
  for (std::size_t p = 0; p < cam.pixels(); ++p) {
    const double truth = cam.expected_slope_codes(p, at);
    EXPECT_NEAR(r.slopes.slope[p], truth, 0.02 * std::abs(truth)) << p;
    EXPECT_NEAR(r.slopes.f0_mhz[p], cam.resonance_mhz(p, 0.0), 0.05);
    EXPECT_FALSE(r.slopes.is_dead(p));
  }
  EXPECT_EQ(r.curve.f_mhz.size(), f.size());
}

TEST(Calibrate, DarkScanFails) {
  const NVModel nv;
  const auto f = scan_grid(2800.0, 1.0, 0.05);
  std::vector<std::vector<double>> dark(f.size(), std::vector<double>(4, 0.0));
  const OffsetMap off{2, 2, std::vector<double>(4, 0.0)};
  EXPECT_THROW(calibrate(f, dark, 2, 2, off, nv, {}), CalibrationFailed);
}

TEST(Calibrate, OffResonanceScanNamesRange) {
  const NVModel nv;
  const LockinCamera cam(camera_model(2, 2), nv);
  const AcquisitionConfig a = acq(650, 2600, 1);
  const auto f = scan_grid(3300.0, 2.0, 0.05);
  const OffsetMap offsets = ideal_offsets(cam, a, 3100.0);
  try {
    calibrate(f, expected_scan(cam, a, f), 2, 2, offsets, nv, {});
    FAIL() << "expected CalibrationFailed";
  } catch (const CalibrationFailed& e) {
    EXPECT_NE(std::string(e.what()).find("3298.000-3302.000 MHz"), std::string::npos);
  }
}

TEST(Calibrate, StackOverloadChecksCounts) {
  const NVModel nv;
  const auto f = scan_grid(2800.0, 1.0, 0.5);
  std::vector<FrameStack> stacks(2, stack_of(2, 2, 3, 100));
  const OffsetMap off{2, 2, std::vector<double>(4, 0.0)};
  EXPECT_THROW(calibrate(stacks, f, off, nv, {}), MismatchError);
}

TEST(ToField, MissingOffsetsAndMismatch) {
  const NVModel nv;
  const FrameStack s = stack_of(2, 2, 4, 500);
  SlopeMap slopes;
  slopes.rows = 2;
  slopes.cols = 2;
  slopes.slope.assign(4, 10.0);
  slopes.f0_mhz.assign(4, 2800.0);
  slopes.operating_pv.assign(4, 0.0);
  slopes.dead.assign(4, 0);
  EXPECT_THROW(to_field(s, slopes, nullptr, nv), Error);
  const OffsetMap off{2, 2, std::vector<double>(4, 500.0)};
  const FieldSeries fs = to_field(s, slopes, &off, nv);
  for (double v : fs.values_ut) {
    EXPECT_EQ(v, 0.0);
  }
  SlopeMap wrong = slopes;
  wrong.rows = 1;
  wrong.cols = 4;
  EXPECT_THROW(to_field(s, wrong, &off, nv), MismatchError);
}

TEST(ToField, ConversionAndDeadPixels) {
  const NVModel nv;
  FrameStack s = stack_of(1, 2, 1, 0);
  s.i_codes = {528, 500};
  SlopeMap slopes;
  slopes.rows = 1;
  slopes.cols = 2;
  slopes.slope = {10.0, 0.0};
  slopes.f0_mhz = {2800, 2800};
  slopes.operating_pv = {0.0, 0.0};
  slopes.dead = {0, 1};
  slopes.field_sign = 1;
  const OffsetMap off{1, 2, {500.0, 500.0}};
  const FieldSeries fs = to_field(s, slopes, &off, nv);
  // 28 codes / 10 codes per MHz = 2.8 MHz = 100 uT
  EXPECT_NEAR(fs.values_ut[0], 100.0, 1e-9);
  EXPECT_TRUE(std::isnan(fs.values_ut[1]));
  EXPECT_FALSE(fs.valid[1]);
}

TEST(Average, SingleStackIsIdentity) {
  const NVModel nv;
  const LockinCamera cam(camera_model(3, 3), nv);
  AcquisitionConfig a = acq(650, 2600, 30);
  a.mw_frequency_mhz = cam.center_frequency_mhz() + max_slope_detunings(nv).front();
  const OffsetMap off = ideal_offsets(cam, a, 3100.0);
  const SlopeMap slopes = ideal_slope_map(cam, a, off, 1);
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(9), a, 0);
  const std::vector<FrameStack> one{s};
  EXPECT_EQ(average_acquisitions(one, slopes, &off, nv).values_ut,
            to_field(s, slopes, &off, nv).values_ut);
}

TEST(Average, FixedOrderIndependentOfWorkers) {
  const NVModel nv;
  const LockinCamera cam(camera_model(4, 4), nv);
  AcquisitionConfig a = acq(650, 2600, 20);
  a.mw_frequency_mhz = cam.center_frequency_mhz() + max_slope_detunings(nv).front();
  const OffsetMap off = ideal_offsets(cam, a, 3100.0);
  const SlopeMap slopes = ideal_slope_map(cam, a, off, 1);
  std::vector<FrameStack> stacks;
  for (std::uint64_t k = 0; k < 5; ++k) {
    stacks.push_back(cam.synthesize_acquisition(Scene::zero(16), a, k));
  }
  const auto r1 = average_acquisitions(stacks, slopes, &off, nv, 1);
  const auto r3 = average_acquisitions(stacks, slopes, &off, nv, 3);
  EXPECT_EQ(r1.values_ut, r3.values_ut);
  EXPECT_EQ(r1.n_averaged, 5u);
}

TEST(Average, EmptyAndMismatchedStacks) {
  const NVModel nv;
  SlopeMap slopes;
  const OffsetMap off;
  EXPECT_THROW(average_acquisitions({}, slopes, &off, nv), MismatchError);
  PvAccumulator acc;
  acc.add(stack_of(2, 2, 4, 1));
  FrameStack other = stack_of(2, 2, 4, 1);
  other.trigger_phase_rad = 0.5;
  EXPECT_THROW(acc.add(other), MismatchError);
  EXPECT_THROW(acc.add(stack_of(2, 2, 5, 1)), MismatchError);
}

TEST(Spectrum, BinExactToneReadsAmplitude) {
  std::vector<double> v(500);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = 3.0 + 1.0 * std::sin(2.0 * std::numbers::pi * 130.0 * i / 650.0 + 0.3);
  }
  const AmplitudeSpectrum s = spectrum(v, 650.0);
  EXPECT_DOUBLE_EQ(s.resolution_hz, 1.3);
  EXPECT_NEAR(s.at(130.0), 1.0, 1e-12);
  EXPECT_NEAR(s.amplitude[100], 1.0, 1e-12);
  EXPECT_NEAR(s.amplitude[0], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.peak_hz(), 130.0);
}

TEST(Spectrum, ConstantInputIsZero) {
  const std::vector<double> v(64, 7.5);
  for (double a : spectrum(v, 100.0).amplitude) {
    EXPECT_NEAR(a, 0.0, 1e-12);
  }
  EXPECT_THROW(spectrum(std::vector<double>{1.0}, 100.0), InvalidArgument);
}

TEST(Spectrum, OffBinLeakageFollowsDirichletKernel) {
  const std::size_t n = 500;
  const double fps = 650.0;
  const double bin = 100.37;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::cos(2.0 * std::numbers::pi * bin * static_cast<double>(i) / n);
  }
  const AmplitudeSpectrum s = spectrum(v, fps);
  for (int k = 97; k <= 104; ++k) {
    const double d = bin - k;
    const double kernel =
        std::abs(std::sin(std::numbers::pi * d) / (n * std::sin(std::numbers::pi * d / n)));
    EXPECT_NEAR(s.amplitude[k], kernel, 0.01) << k;
  }
}

TEST(Linearity, FitAndDegenerateCases) {
  const std::vector<double> i{1e-3, 2e-3, 4e-3, 10e-3, 20e-3};
  std::vector<double> a;
  std::vector<double> a2;
  for (double x : i) {
    a.push_back(2500.0 * x);
    a2.push_back(5000.0 * x);
  }
  const LineFit f = ac_linearity(i, a);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_NEAR(ac_linearity(i, a2).slope, 2.0 * f.slope, 1e-9);
  const std::vector<double> zeros(5, 0.0);
  EXPECT_THROW(ac_linearity(zeros, a), InvalidArgument);
  EXPECT_THROW(ac_linearity(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
               InvalidArgument);
}

TEST(Pulses, SixCompletePeriodsInAcquisition) {
  const PulseFrames pf = classify_pulse_frames(500, 3500.0, PulseWindow{});
  EXPECT_EQ(pf.pulses, 6u);
  EXPECT_FALSE(pf.pulse.empty());
  for (std::size_t f : pf.pulse) {
    const double t = f / 3.5;
    EXPECT_GE(t, 20.0 - 1e-9);
    EXPECT_LE(std::fmod(t + 1e-9, 20.0), 1.0);
  }
  PulseWindow all;
  all.analysis_start_ms = 0.0;
  EXPECT_EQ(classify_pulse_frames(500, 3500.0, all).pulses, 7u);
}

TEST(Pulses, PeriodLongerThanWindowThrows) {
  PulseWindow w;
  w.analysis_start_ms = 130.0;
  EXPECT_THROW(classify_pulse_frames(500, 3500.0, w), InvalidArgument);
  w = PulseWindow{};
  w.fwd_ms = 15;
  w.rev_ms = 10;
  EXPECT_THROW(classify_pulse_frames(500, 3500.0, w), InvalidArgument);
}

TEST(Pulses, MetricsRecoverStepAmplitude) {
  const Waveform w = Waveform::pulse_train(1, 1, 20, 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<double> v(500);
  std::vector<double> zero(500);
  for (std::size_t f = 0; f < v.size(); ++f) {
    // frame mean of the drive, sampled finely
    double s = 0.0;
    for (int j = 0; j < 100; ++j) {
      s += w.sample((f + (j + 0.5) / 100.0) / 3500.0);
    }
    v[f] = 40.0 * s / 100.0 + noise(rng);
    zero[f] = noise(rng);
  }
  const PulseMetrics m = pulse_metrics(v, 3500.0, PulseWindow{});
  EXPECT_NEAR(m.amplitude_ut, 40.0, 4.0 * m.noise_ut);
  EXPECT_GT(m.snr, 100.0);
  EXPECT_EQ(m.pulses, 6u);
  const PulseMetrics z = pulse_metrics(zero, 3500.0, PulseWindow{});
  EXPECT_LT(std::abs(z.amplitude_ut), 3.0 * z.noise_ut);
}

TEST(SnrMask, StrictThresholdAndExclusions) {
  FieldMap s;
  s.rows = 1;
  s.cols = 5;
  s.values = {3.1, 3.0, -3.1, 5.0, std::nan("")};
  FieldMap n = s;
  n.values = {1.0, 1.0, 1.0, 0.0, 1.0};
  const SnrMaskedMap m = snr_mask(s, n, 3.0);
  EXPECT_EQ(m.mask, (std::vector<unsigned char>{1, 0, 1, 0, 0}));
  EXPECT_EQ(m.included, 2u);
  EXPECT_EQ(m.masked.values[1], 0.0);
  EXPECT_EQ(m.masked.values[0], 3.1);
  FieldMap wrong = n;
  wrong.cols = 4;
  wrong.values.pop_back();
  EXPECT_THROW(snr_mask(s, wrong), InvalidArgument);
}

TEST(SnrMask, RaisingThresholdNeverAddsPixels) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  FieldMap s;
  s.rows = 20;
  s.cols = 20;
  s.values.resize(400);
  FieldMap n = s;
  for (std::size_t p = 0; p < 400; ++p) {
    s.values[p] = u(rng) - 5.0;
    n.values[p] = u(rng) * 0.3;
  }
  std::vector<unsigned char> prev = snr_mask(s, n, 0.0).mask;
  for (double t = 0.5; t < 40.0; t += 0.5) {
    const auto cur = snr_mask(s, n, t).mask;
    for (std::size_t p = 0; p < 400; ++p) {
      EXPECT_LE(cur[p], prev[p]);
    }
    prev = cur;
  }
}

TEST(QuietWindows, FrameCountAndOverlap) {
  const std::vector<QuietWindow> tiny{{0.0, 0.5}};
  EXPECT_THROW(quiet_frames(500, 3500.0, tiny), InvalidArgument);
  const std::vector<QuietWindow> ok{{10.0, 15.0}};
  const auto f = quiet_frames(500, 3500.0, ok);
  EXPECT_GE(f.size(), 3u);
  EXPECT_NO_THROW(check_quiet_windows(ok, PulseParams{}));
  const std::vector<QuietWindow> bad{{0.5, 5.0}};
  EXPECT_THROW(check_quiet_windows(bad, PulseParams{}), InvalidArgument);
  const std::vector<QuietWindow> late{{39.0, 41.5}};
  EXPECT_THROW(check_quiet_windows(late, PulseParams{}), InvalidArgument);
}

TEST(NoiseTracker, StdFallsWithAveraging) {
  NVModel nv;
  nv.linewidth_mhz = 4.0;
  const LockinCamera cam(camera_model(6, 6), nv);
  AcquisitionConfig a = acq(3500, 14000, 200);
  a.mw_frequency_mhz = cam.center_frequency_mhz() + max_slope_detunings(nv).front();
  const OffsetMap off = ideal_offsets(cam, a, 3100.0);
  const SlopeMap slopes = ideal_slope_map(cam, a, off, 1);
  const PreparedScene prep = cam.prepare(Scene::zero(36), a);
  NoiseTracker t(slopes, off, nv, {{10.0, 15.0}, {30.0, 35.0}}, {1, 4, 16});
  for (std::uint64_t k = 0; k < 16; ++k) {
    t.add(cam.synthesize(prep, k));
  }
  const NoiseStats r = t.result();
  ASSERT_EQ(r.n, (std::vector<std::size_t>{1, 4, 16}));
  EXPECT_NEAR(r.std_ut[1] / r.std_ut[0], 0.5, 0.06);
  EXPECT_NEAR(r.std_ut[2] / r.std_ut[0], 0.25, 0.04);
  EXPECT_EQ(r.histogram.total(), 36u);
  EXPECT_NEAR(r.sensitivity_nt_rthz, r.std_ut[2] * 1e3 / std::sqrt(1750.0), 1e-9);
}
