#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nvw/errors.hpp"
#include "nvw/experiment.hpp"
#include "nvw/lockin_camera.hpp"
#include "nvw/recon.hpp"
#include "nvw/stats.hpp"

using namespace nvw;

namespace {

CameraModel small_camera(std::size_t rows, std::size_t cols) {
  CameraModel m;
  m.grid.rows = rows;
  m.grid.cols = cols;
  m.grid.pitch_um = 1.5;
  m.seed = 11;
  return m;
}

AcquisitionConfig acq_650(std::size_t frames) {
  AcquisitionConfig a;
  a.fps = 650.0;
  a.f_mod_hz = 2600.0;
  a.frames_per_acq = frames;
  a.seed = 5;
  return a;
}

double operating_point(const LockinCamera& cam) {
  return cam.center_frequency_mhz() + max_slope_detunings(cam.nv()).front();
}

}  // namespace

TEST(PvAmplitude, PythagoreanAndClamped) {
  EXPECT_EQ(pv_amplitude(0, 0), 0.0);
  EXPECT_EQ(pv_amplitude(3, 4), 5.0);
  EXPECT_EQ(pv_amplitude(2000, 0), 1023.0);
  EXPECT_EQ(pv_amplitude(1000, 1000), 1023.0);
}

TEST(PhotonBudget, HandComputation) {
  const double n = photon_budget_from_power(1.7e-9, 680.0, 1.0 / 3500.0);
  EXPECT_NEAR(n, 1.66e6, 0.01e6);
  EXPECT_EQ(photon_budget_from_power(0.0, 680.0, 1.0), 0.0);
  EXPECT_NEAR(photon_budget_from_power(1e-9, 680.0, 2e-3),
              2.0 * photon_budget_from_power(1e-9, 680.0, 1e-3), 1e-6);
}

TEST(Desync, ThresholdAndRolloff) {
  DesyncModel d;
  EXPECT_EQ(desync_attenuation(14000.0, d), 1.0);
  d.enabled = true;
  EXPECT_EQ(desync_attenuation(2500.0, d), 1.0);
  EXPECT_LT(desync_attenuation(14000.0, d), 1.0);
  EXPECT_GE(desync_attenuation(1e9, d), 0.0);
}

TEST(Acquisition, DurationAndValidation) {
  AcquisitionConfig a;
  a.fps = 3500.0;
  a.f_mod_hz = 14000.0;
  a.frames_per_acq = 500;
  EXPECT_NEAR(a.duration_s() * 1e3, 142.857, 1e-3);
  EXPECT_EQ(a.periods_per_frame(), 4u);
  EXPECT_DOUBLE_EQ(a.window_fraction(), 1.0);
  a.f_mod_hz = 6000.0;
  EXPECT_EQ(a.periods_per_frame(), 1u);
  a.f_mod_hz = 6999.0;
  EXPECT_THROW(a.validate(), ConfigError);
}

TEST(Synthesize, DarkStackIsAllZero) {
  const LockinCamera cam(small_camera(3, 3), NVModel{});
  AcquisitionConfig a = acq_650(20);
  a.photons_per_pixel_per_frame = 0.0;
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(9), a, 0);
  for (auto v : s.i_codes) {
    EXPECT_EQ(v, 0);
  }
  for (auto v : s.q_codes) {
    EXPECT_EQ(v, 0);
  }
}

TEST(Synthesize, DcRejectionOffResonance) {
  CameraModel m = small_camera(4, 4);
  m.offset_i_min = m.offset_i_max = 512.0;
  m.offset_q_min = m.offset_q_max = 512.0;
  const LockinCamera cam(m, NVModel{});
  AcquisitionConfig a = acq_650(2000);
  a.mw_frequency_mhz = 3300.0;
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(16), a, 0);
  std::vector<double> di;
  std::vector<double> dq;
  for (std::size_t k = 0; k < s.i_codes.size(); ++k) {
    di.push_back(s.i_codes[k] - 512.0);
    dq.push_back(s.q_codes[k] - 512.0);
  }
  const double n = static_cast<double>(di.size());
  EXPECT_LT(std::abs(mean(di)), 3.0 * stddev(di) / std::sqrt(n));
  EXPECT_LT(std::abs(mean(dq)), 3.0 * stddev(dq) / std::sqrt(n));
  EXPECT_GT(stddev(di), 1.0);
}

TEST(Synthesize, ZeroTriggerPhasePutsSignalInI) {
  CameraModel m = small_camera(2, 2);
  m.shot_noise = false;
  const LockinCamera cam(m, NVModel{});
  AcquisitionConfig a = acq_650(1);
  a.mw_frequency_mhz = operating_point(cam);
  for (std::size_t p = 0; p < cam.pixels(); ++p) {
    const auto [i, q] = cam.expected_iq(p, a);
    const double si = i - cam.offset_i(p);
    const double sq = q - cam.offset_q(p);
    EXPECT_LT(sq * sq, 0.01 * si * si);
    EXPECT_GT(std::abs(si), 10.0);
  }
  a.trigger_phase_rad = std::numbers::pi / 2.0;
  const auto [i, q] = cam.expected_iq(0, a);
  EXPECT_GT(std::abs(q - cam.offset_q(0)), std::abs(i - cam.offset_i(0)));
}

TEST(Synthesize, CodesStayInTenBitRange) {
  CameraModel m = small_camera(3, 3);
  m.gain_codes = 1e7;
  const LockinCamera cam(m, NVModel{});
  AcquisitionConfig a = acq_650(10);
  a.mw_frequency_mhz = operating_point(cam);
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(9), a, 0);
  bool saturated = false;
  for (std::size_t k = 0; k < s.i_codes.size(); ++k) {
    EXPECT_GE(s.i_codes[k], 0);
    EXPECT_LE(s.i_codes[k], kMaxCode);
    EXPECT_GE(s.q_codes[k], 0);
    EXPECT_LE(s.q_codes[k], kMaxCode);
    saturated = saturated || s.i_codes[k] == 0 || s.i_codes[k] == kMaxCode;
  }
  EXPECT_TRUE(saturated);
}

TEST(Synthesize, DeterministicAcrossWorkersAndCache) {
  const LockinCamera cam(small_camera(6, 5), NVModel{});
  AcquisitionConfig a = acq_650(40);
  a.mw_frequency_mhz = operating_point(cam);
  FieldMap per_amp;
  per_amp.rows = 6;
  per_amp.cols = 5;
  per_amp.values.assign(30, 0.0);
  for (std::size_t p = 0; p < 30; ++p) {
    per_amp.values[p] = 100.0 * static_cast<double>(p);
  }
  const Scene scene = Scene::from_waveform(per_amp, Waveform::square_wave(130.0, 0.004));
  const PreparedScene cached = cam.prepare(scene, a, 1);
  const PreparedScene uncached = cam.prepare(scene, a, 3, 0);
  EXPECT_TRUE(cached.cached());
  EXPECT_FALSE(uncached.cached());
  const FrameStack s1 = cam.synthesize(cached, 2, 1);
  const FrameStack s2 = cam.synthesize(uncached, 2, 3);
  const FrameStack s3 = cam.synthesize(cached, 2, 4);
  EXPECT_EQ(s1.i_codes, s2.i_codes);
  EXPECT_EQ(s1.q_codes, s2.q_codes);
  EXPECT_EQ(s1.i_codes, s3.i_codes);
  const FrameStack other = cam.synthesize(cached, 3, 1);
  EXPECT_NE(s1.i_codes, other.i_codes);
}

TEST(Synthesize, ShotNoiseScalesWithInverseRootPhotons) {
  CameraModel m = small_camera(4, 4);
  m.offset_i_min = m.offset_i_max = 512.0;
  const LockinCamera cam(m, NVModel{});
  AcquisitionConfig a = acq_650(1000);
  a.mw_frequency_mhz = 3300.0;
  auto i_std = [&](double photons) {
    AcquisitionConfig b = a;
    b.photons_per_pixel_per_frame = photons;
    const FrameStack s = cam.synthesize_acquisition(Scene::zero(16), b, 0);
    std::vector<double> v(s.i_codes.begin(), s.i_codes.end());
    return stddev(v);
  };
  const double ratio = i_std(1.66e6) / i_std(4 * 1.66e6);
  EXPECT_NEAR(ratio, 2.0, 0.1);
}

TEST(Synthesize, PoissonPathMatchesGaussianMean) {
  CameraModel m = small_camera(1, 1);
  m.offset_i_min = m.offset_i_max = 512.0;
  m.offset_q_min = m.offset_q_max = 512.0;
  const LockinCamera cam(m, NVModel{});
  AcquisitionConfig a = acq_650(3000);
  a.photons_per_pixel_per_frame = 2000.0;  // sparse: Poisson sampling
  a.mw_frequency_mhz = operating_point(cam);
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(1), a, 0);
  std::vector<double> v(s.i_codes.begin(), s.i_codes.end());
  const auto [ei, eq] = cam.expected_iq(0, a);
  EXPECT_NEAR(mean(v), ei, 4.0 * stddev(v) / std::sqrt(static_cast<double>(v.size())));
}

TEST(Synthesize, StackMetadata) {
  const LockinCamera cam(small_camera(2, 3), NVModel{});
  AcquisitionConfig a = acq_650(7);
  const FrameStack s = cam.synthesize_acquisition(Scene::zero(6), a, 9);
  EXPECT_EQ(s.rows, 2u);
  EXPECT_EQ(s.cols, 3u);
  EXPECT_EQ(s.frames, 7u);
  EXPECT_EQ(s.acquisition, 9u);
  EXPECT_EQ(s.i_codes.size(), 42u);
  EXPECT_THROW(cam.synthesize_acquisition(Scene::zero(5), a, 0), MismatchError);
}

TEST(Synthesize, AliasFoldingFollowsFrameIntegration) {
  // a tone above Nyquist folds to |f - fps| with the frame-integration sinc
  NVModel nv;
  nv.linewidth_mhz = 4.0;
  CameraModel m = small_camera(8, 8);
  m.shot_noise = false;
  m.f0_scatter_mhz = 0.0;
  const LockinCamera cam(m, nv);
  AcquisitionConfig a = acq_650(500);
  a.mw_frequency_mhz = operating_point(cam);
  const OffsetMap offsets = ideal_offsets(cam, a, 3100.0);
  const SlopeMap slopes = ideal_slope_map(cam, a, offsets, field_sign(nv, m.bias_t));

  const double amp_ut = 20.0;
  for (double f_tone : {130.0, 520.0, 780.0}) {
    Scene scene;
    scene.coupling_t.assign(cam.pixels(), amp_ut * 1e-6);
    scene.drive = [f_tone](double t) { return std::sin(2.0 * std::numbers::pi * f_tone * t); };
    const FrameStack s = cam.synthesize_acquisition(scene, a, 0);
    const FieldSeries fs = to_field(s, slopes, &offsets, nv);
    const AmplitudeSpectrum spec = average_spectrum(fs, {});
    const double folded = std::abs(f_tone - std::round(f_tone / a.fps) * a.fps);
    const double x = std::numbers::pi * f_tone / a.fps;
    const double expected = amp_ut * std::abs(std::sin(x) / x);
    EXPECT_NEAR(spec.peak_hz(), folded, 1e-9) << f_tone;
    EXPECT_NEAR(spec.at(folded), expected, 0.03 * expected) << f_tone;
  }
}
