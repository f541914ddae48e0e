#include <benchmark/benchmark.h>

#include "iccl/propagation.hpp"
#include "iccl/rng.hpp"
#include "iccl/scene.hpp"

using namespace iccl;

namespace {

void BM_RayBoxInteriorLength(benchmark::State& state) {
  const Building b{Vec3(-8, -4, 0), Vec3(6, 9, 12), 1.0};
  Rng rng(1);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  const Vec3 p0(u(rng), u(rng), u(rng));
  const Vec3 p1(u(rng), u(rng), u(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ray_box_interior_length(p0, p1, b));
  }
}
BENCHMARK(BM_RayBoxInteriorLength);

void BM_TrueGain(benchmark::State& state) {
  const Scene scene = generate_random_scene(SceneGenConfig{}, 1);
  ChannelModel model;
  const Vec3 node(12.0, 30.0, 0.0);
  const Vec3 wp(60.0, 45.0, 40.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(true_gain(scene, model, node, wp));
  }
}
BENCHMARK(BM_TrueGain);

void BM_MeasureCsi(benchmark::State& state) {
  const Scene scene = generate_random_scene(SceneGenConfig{}, 1);
  const Trajectory traj = build_circular_trajectory(Vec3(40, 45, 40), 20.0,
                                                    static_cast<int>(state.range(0)));
  ChannelModel model;
  model.noise_power = 1e-10;
  Rng rng(7);
  const Vec3 node(12.0, 30.0, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(measure_csi(scene, model, traj, node, rng));
  }
}
BENCHMARK(BM_MeasureCsi)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
