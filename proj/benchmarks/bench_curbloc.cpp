#include <benchmark/benchmark.h>

#include "curbloc/curb_map.hpp"
#include "curbloc/localizer.hpp"
#include "curbloc/ndt.hpp"
#include "curbloc/sim.hpp"
#include "curbloc/tracker.hpp"

using namespace curbloc;

namespace {

struct MappedWorld {
  World world;
  BaseMap base;
  CurbMap curbs;
  std::vector<DriveFrame> drive;

  MappedWorld() {
    world = generate_world(loop_world_spec(7));
    DriveNoise mapping;
    mapping.seed = 11;
    mapping.clutter_rate = 0.0;
    base = base_map_from_drive(simulate_drive(world, mapping), 0);
    curbs = build_curb_map(base);
    parameterize_curb_map(curbs, {}, 7);
    DriveNoise n;
    n.seed = 22;
    drive = simulate_drive(world, n);
  }
};

const MappedWorld& mapped() {
  static const MappedWorld w;
  return w;
}

void BM_Track(benchmark::State& state) {
  const auto& w = mapped();
  const LocalizationMap map(w.base, w.curbs);
  const TrackerConfig cfg;
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& f = w.drive[k];
    benchmark::DoNotOptimize(track(f.gt_pose, f.detection, map, cfg));
    k = (k + 37) % w.drive.size();
  }
}
BENCHMARK(BM_Track)->Unit(benchmark::kMillisecond);

void BM_RegisterNdt(benchmark::State& state) {
  const auto& w = mapped();
  const LocalizationMap map(w.base, w.curbs);
  const auto& f = w.drive[100];
  const auto ref = retrieve_reference(map, f.gt_pose, TrackerConfig{});
  const PointCloud3 input = apply(f.gt_pose, f.detection);
  const NdtGrid grid = build_grid(ref->cloud, TrackerConfig::default_ndt());
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        register_ndt(input, grid, Pose::Identity(kMapFrame, kMapFrame), TrackerConfig::default_ndt()));
  }
}
BENCHMARK(BM_RegisterNdt)->Unit(benchmark::kMillisecond);

void BM_Parameterize(benchmark::State& state) {
  const World w = generate_world(loop_world_spec(3, 200, 100));
  const PointCloud3 raw = sample_world_curbs(w, 5.0, 0.05, 4);
  for (auto _ : state) benchmark::DoNotOptimize(parameterize(raw, {}, 5));
  state.counters["points"] = static_cast<double>(raw.size());
}
BENCHMARK(BM_Parameterize)->Unit(benchmark::kMillisecond);

void BM_Localize(benchmark::State& state) {
  const auto& w = mapped();
  const LocalizationMap map(w.base, w.curbs);
  const std::vector<DriveFrame> frames(w.drive.begin(), w.drive.begin() + 200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(localize(frames, frames.front().gt_pose, map, LocalizerConfig{}));
  }
}
BENCHMARK(BM_Localize)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
