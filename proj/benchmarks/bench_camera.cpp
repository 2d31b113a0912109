#include <benchmark/benchmark.h>

#include "nvw/geom_field.hpp"
#include "nvw/lockin_camera.hpp"
#include "nvw/waveforms.hpp"

using namespace nvw;

namespace {

CameraModel camera_64() {
  CameraModel m;
  m.grid.rows = 64;
  m.grid.cols = 64;
  m.seed = 1;
  return m;
}

AcquisitionConfig acq_3500() {
  AcquisitionConfig a;
  a.fps = 3500.0;
  a.f_mod_hz = 14000.0;
  a.frames_per_acq = 500;
  a.mw_frequency_mhz = 2781.1;
  return a;
}

Scene pulse_scene(const CameraModel& m) {
  const CircuitLayout layout = make_cross_layout(10.0, 5.0, 15.0, 450.0, TrackAxis::y);
  FieldMap per_amp = field_map(layout, 1.0, m.grid, 50.0, default_sensing_axis());
  return Scene::from_waveform(per_amp, Waveform::pulse_train(1.0, 1.0, 20.0, 0.020));
}

}  // namespace

static void BM_Prepare(benchmark::State& state) {
  NVModel nv;
  nv.linewidth_mhz = 4.0;
  const CameraModel m = camera_64();
  const LockinCamera cam(m, nv);
  const Scene scene = pulse_scene(m);
  const AcquisitionConfig acq = acq_3500();
  for (auto _ : state) {
    PreparedScene p = cam.prepare(scene, acq);
    benchmark::DoNotOptimize(p.unique_frames());
  }
}
BENCHMARK(BM_Prepare)->Unit(benchmark::kMillisecond);

static void BM_Synthesize(benchmark::State& state) {
  NVModel nv;
  nv.linewidth_mhz = 4.0;
  const CameraModel m = camera_64();
  const LockinCamera cam(m, nv);
  const PreparedScene prep = cam.prepare(pulse_scene(m), acq_3500());
  std::uint64_t k = 0;
  for (auto _ : state) {
    FrameStack s = cam.synthesize(prep, k++);
    benchmark::DoNotOptimize(s.i_codes.data());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 64 * 500);
}
BENCHMARK(BM_Synthesize)->Unit(benchmark::kMillisecond);
