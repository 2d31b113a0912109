#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "nvw/errors.hpp"
#include "nvw/waveforms.hpp"

using namespace nvw;

TEST(Square, AlternatesAtHalfPeriod) {
  const Waveform w = Waveform::square_wave(130.0, 0.004);
  EXPECT_EQ(w.sample(1e-9), 0.004);
  EXPECT_EQ(w.sample(1.0 / 260.0 + 1e-7), -0.004);
}

TEST(Square, PeriodicAndZeroMean) {
  const Waveform w = Waveform::square_wave(130.0, 0.02);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / (130.0 * n);
    sum += w.sample(t);
    EXPECT_EQ(w.sample(t), w.sample(t + 3.0 / 130.0));
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-12);
}

TEST(Square, ValuesAndScaling) {
  const Waveform a = Waveform::square_wave(97.0, 0.001, 0.3);
  const Waveform b = Waveform::square_wave(97.0, 0.003, 0.3);
  for (double t = 0; t < 0.05; t += 1.3e-4) {
    const double v = a.sample(t);
    EXPECT_TRUE(v == 0.001 || v == -0.001);
    EXPECT_DOUBLE_EQ(b.sample(t), 3.0 * a.sample(t));
  }
  EXPECT_THROW(Waveform::square_wave(0.0, 0.01), ConfigError);
}

TEST(PulseTrain, ForwardReverseQuiet) {
  const Waveform w = Waveform::pulse_train(1, 1, 20, 0.02);
  EXPECT_EQ(w.sample(0.5e-3), 0.02);
  EXPECT_EQ(w.sample(1.5e-3), -0.02);
  EXPECT_EQ(w.sample(10e-3), 0.0);
  EXPECT_EQ(w.sample(40.5e-3), 0.02);
}

TEST(PulseTrain, ZeroMeanPerPeriod) {
  const Waveform w = Waveform::pulse_train(1, 1, 20, 0.02);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    sum += w.sample((i + 0.5) * 1e-6);
  }
  EXPECT_NEAR(sum, 0.0, 1e-9);
}

TEST(PulseTrain, SevenPeriodsInAcquisition) {
  const double duration_ms = 500.0 / 3500.0 * 1e3;
  EXPECT_EQ(static_cast<int>(duration_ms / 20.0), 7);
}

TEST(PulseTrain, RejectsWidthsBeyondPeriod) {
  EXPECT_THROW(Waveform::pulse_train(15, 10, 20, 0.02), ConfigError);
}

TEST(Fepsp, PeakMatchesAmplitude) {
  const Waveform w = Waveform::fepsp(0.02);
  const FepspParams p;
  double peak = 0.0;
  for (int i = 0; i < 400000; ++i) {
    const double t = p.onset_ms * 1e-3 + p.artifact_width_ms * 1e-3 + i * 1e-7;
    peak = std::max(peak, std::abs(w.sample(t)));
  }
  EXPECT_NEAR(peak, 0.02, 0.02 * 1e-4);
  EXPECT_LT(w.sample(p.onset_ms * 1e-3 + 0.003), 0.0);
}

TEST(Fepsp, DecaysToZeroAndHasArtifact) {
  const Waveform w = Waveform::fepsp(0.02);
  EXPECT_NEAR(w.sample(1.0), 0.0, 1e-12);
  EXPECT_EQ(w.sample(0.0), 0.0);
  const double t0 = 10e-3;
  EXPECT_GT(w.sample(t0 + 0.01e-3), 0.0);
  EXPECT_LT(w.sample(t0 + 0.04e-3), 0.0);
}

TEST(Fepsp, PeakScalesWithAmplitude) {
  const Waveform a = Waveform::fepsp(0.01);
  const Waveform b = Waveform::fepsp(0.02);
  EXPECT_NEAR(b.sample(0.013), 2.0 * a.sample(0.013), 1e-15);
  FepspParams bad;
  bad.tau_slow_ms = 0.5;
  EXPECT_THROW(Waveform::fepsp(0.02, bad), ConfigError);
}

TEST(Sampled, ZeroOrderHoldAndClamp) {
  const Waveform w = Waveform::sampled({0.0, 1.0, 2.0}, 10.0);
  EXPECT_EQ(w.sample(0.05), 0.0);
  EXPECT_EQ(w.sample(0.15), 1.0);
  EXPECT_EQ(w.sample(5.0), 2.0);
  EXPECT_EQ(Waveform::sampled({0.02}, 1.0).sample(123.0), 0.02);
  EXPECT_TRUE(Waveform::constant(0.02).is_constant());
  EXPECT_THROW(Waveform::sampled({}, 1.0), ConfigError);
}

TEST(Sampled, ReproducesSquareWithinHoldError) {
  const Waveform sq = Waveform::square_wave(130.0, 0.004);
  const double rate = 100e3;
  std::vector<double> v(20000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = sq.sample(static_cast<double>(i) / rate);
  }
  const Waveform s = Waveform::sampled(v, rate);
  std::size_t differ = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double t = i * 0.19 / n;
    differ += s.sample(t) != sq.sample(t) ? 1 : 0;
  }
  // only samples within one hold step after an edge may differ
  EXPECT_LT(static_cast<double>(differ) / n, 2.0 * 130.0 * 2.0 / rate);
}

TEST(Sampled, CsvRoundTripIsBitExact) {
  const auto path = std::filesystem::temp_directory_path() / "nvw_sampled_roundtrip.csv";
  SampledParams p;
  p.rate_hz = 3500.0;
  p.values = {0.1, -1e-17, 0.3333333333333333, 2.0 / 3.0, 0.0};
  write_sampled_csv(path, p);
  const Waveform w = read_sampled_csv(path);
  ASSERT_NE(w.sampled_params(), nullptr);
  EXPECT_EQ(w.sampled_params()->values, p.values);
  EXPECT_EQ(w.sampled_params()->rate_hz, 3500.0);
  std::filesystem::remove(path);
}

TEST(Sampled, CsvErrors) {
  const auto path = std::filesystem::temp_directory_path() / "nvw_sampled_bad.csv";
  {
    std::ofstream(path) << "rate=5\n1\n";
  }
  EXPECT_THROW(read_sampled_csv(path), FormatError);
  {
    std::ofstream(path) << "rate_hz=5\n1\nabc\n";
  }
  EXPECT_THROW(read_sampled_csv(path), FormatError);
  std::filesystem::remove(path);
}

TEST(Kind, Names) {
  EXPECT_EQ(waveform_kind_name(WaveformKind::pulse_train), "pulse_train");
  EXPECT_EQ(waveform_kind_name(WaveformKind::fepsp), "fepsp");
}
