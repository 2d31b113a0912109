#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nvw/recon.hpp"

using namespace nvw;

static void BM_Spectrum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::sin(2.0 * std::numbers::pi * 130.0 * static_cast<double>(i) / 650.0);
  }
  for (auto _ : state) {
    AmplitudeSpectrum s = spectrum(v, 650.0);
    benchmark::DoNotOptimize(s.amplitude.data());
  }
}
BENCHMARK(BM_Spectrum)->Arg(500)->Arg(4096);

static void BM_AverageSpectrum64(benchmark::State& state) {
  FieldSeries fs;
  fs.rows = 64;
  fs.cols = 64;
  fs.frames = 500;
  fs.fps = 650.0;
  fs.n_averaged = 1;
  fs.values_ut.resize(fs.pixels() * fs.frames);
  fs.valid.assign(fs.pixels(), 1);
  for (std::size_t k = 0; k < fs.values_ut.size(); ++k) {
    fs.values_ut[k] = std::sin(0.1 * static_cast<double>(k));
  }
  for (auto _ : state) {
    AmplitudeSpectrum s = average_spectrum(fs, {});
    benchmark::DoNotOptimize(s.amplitude.data());
  }
}
BENCHMARK(BM_AverageSpectrum64)->Unit(benchmark::kMillisecond);
