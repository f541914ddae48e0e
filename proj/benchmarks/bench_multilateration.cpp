#include <benchmark/benchmark.h>

#include <vector>

#include "iccl/multilateration.hpp"
#include "iccl/rng.hpp"

using namespace iccl;

namespace {

void BM_LinearizedSolve(benchmark::State& state) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  const int m = static_cast<int>(state.range(0));
  std::vector<Vec2> anchors;
  for (int k = 0; k < m; ++k) anchors.emplace_back(u(rng), u(rng));
  const Vec2 truth(u(rng), u(rng));
  std::vector<double> d;
  for (const auto& a : anchors) d.push_back((truth - a).norm());
  for (auto _ : state) {
    benchmark::DoNotOptimize(linearized_solve(anchors, d));
  }
}
BENCHMARK(BM_LinearizedSolve)->Arg(3)->Arg(20);

void BM_SolveAndRefine(benchmark::State& state) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int m = static_cast<int>(state.range(0));
  std::vector<Vec2> anchors;
  for (int k = 0; k < m; ++k) anchors.emplace_back(u(rng), u(rng));
  const Vec2 truth(u(rng), u(rng));
  std::vector<double> d;
  for (const auto& a : anchors) d.push_back(std::max(0.0, (truth - a).norm() + noise(rng)));
  for (auto _ : state) {
    const PositionEstimate est = linearized_solve(anchors, d);
    benchmark::DoNotOptimize(refine(est, anchors, d));
  }
}
BENCHMARK(BM_SolveAndRefine)->Arg(20);

}  // namespace
