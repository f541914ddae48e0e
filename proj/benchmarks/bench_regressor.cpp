#include <benchmark/benchmark.h>

#include <numeric>

#include "iccl/regressor.hpp"
#include "iccl/rng.hpp"

using namespace iccl;

namespace {

CsiDataset random_dataset(int m0, int n, std::uint64_t seed) {
  CsiDataset d;
  d.n_waypoints = n;
  Rng rng(seed);
  std::uniform_real_distribution<double> exponent(-12.0, -6.0);
  std::uniform_real_distribution<double> pos(0.0, 80.0);
  for (int i = 0; i < m0; ++i) {
    CsiRecord r;
    r.position = Vec2(pos(rng), pos(rng));
    r.gains.resize(n);
    for (int k = 0; k < n; ++k) r.gains[k] = std::pow(10.0, exponent(rng));
    d.records.push_back(std::move(r));
  }
  return d;
}

void BM_PredictDistance(benchmark::State& state) {
  Model m = make_distance_model(128, 3);
  const CsiDataset d = random_dataset(2, 128, 5);
  m.norm = fit_normalization(d);
  const CsiVector a{d.records[0].gains}, b{d.records[1].gains};
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_distance(m, a, b));
  }
}
BENCHMARK(BM_PredictDistance);

void BM_PredictDistancesBatch(benchmark::State& state) {
  Model m = make_distance_model(128, 3);
  const int count = static_cast<int>(state.range(0));
  const CsiDataset d = random_dataset(count, 128, 5);
  m.norm = fit_normalization(d);
  const nn::RowMat rows = normalize_dataset(d, m.norm);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_distances(m, rows, rows));
  }
  state.SetItemsProcessed(state.iterations() * count);
}
BENCHMARK(BM_PredictDistancesBatch)->Arg(256);

void BM_TrainingStep(benchmark::State& state) {
  const int batch_size = static_cast<int>(state.range(0));
  Model m = make_distance_model(128, 3);
  const CsiDataset d = random_dataset(64, 128, 5);
  m.norm = fit_normalization(d);
  const PairDataset pairs(d, m.norm);
  PairDistanceObjective obj(m.net, pairs, 0);
  std::vector<int> batch(static_cast<std::size_t>(batch_size));
  std::iota(batch.begin(), batch.end(), 0);
  std::vector<double> grad(m.net.param_count());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    benchmark::DoNotOptimize(obj.batch_loss_grad(m.params.data(), batch, grad.data()));
  }
  state.SetItemsProcessed(state.iterations() * batch_size);
}
BENCHMARK(BM_TrainingStep)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
