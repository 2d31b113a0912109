#include <benchmark/benchmark.h>

#include "nvw/geom_field.hpp"

using namespace nvw;

static void BM_FieldMap300(benchmark::State& state) {
  const CircuitLayout layout = make_cross_layout(10.0, 5.0, 15.0, 450.0, TrackAxis::y);
  PixelGrid grid;
  grid.rows = 300;
  grid.cols = 300;
  grid.pitch_um = 1.5;
  const Vec3 axis = default_sensing_axis();
  for (auto _ : state) {
    FieldMap m = field_map(layout, 0.020, grid, 10.0, axis, static_cast<unsigned>(state.range(0)));
    benchmark::DoNotOptimize(m.values.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size()));
}
BENCHMARK(BM_FieldMap300)->Arg(1)->Arg(2)->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_SegmentField(benchmark::State& state) {
  const WireSegment seg{{0.0, -225.0, 0.0}, {0.0, 225.0, 0.0}, 10.0};
  double x = 0.0;
  for (auto _ : state) {
    x += 1e-3;
    benchmark::DoNotOptimize(segment_field(seg, 0.020, {x, 3.0, 10.0}));
  }
}
BENCHMARK(BM_SegmentField);
