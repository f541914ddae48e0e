#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "iccl/baselines.hpp"
#include "support/gradcheck.hpp"

using namespace iccl;

namespace {

CsiDataset synthetic_dataset(int m0, int n, std::uint64_t seed) {
  CsiDataset d;
  d.n_waypoints = n;
  Rng rng(seed);
  std::uniform_real_distribution<double> exponent(-12.0, -6.0);
  std::uniform_real_distribution<double> pos(0.0, 50.0);
  for (int i = 0; i < m0; ++i) {
    CsiRecord r;
    r.position = Vec2(pos(rng), pos(rng));
    r.gains.resize(n);
    for (int k = 0; k < n; ++k) r.gains[k] = std::pow(10.0, exponent(rng));
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace

TEST_CASE("fingerprinting recalls every stored vector exactly") {
  const CsiDataset d = synthetic_dataset(40, 16, 5);
  for (bool normalized : {true, false}) {
    const FingerprintStore store = build_fingerprint_store(d, normalized);
    for (int i = 0; i < d.size(); ++i) {
      const CsiVector q{d.records[i].gains};
      CHECK(dfpl_nearest_index(store, q) == i);
      CHECK(dfpl_locate(store, q) == d.records[i].position);
    }
  }
}

TEST_CASE("a singleton store answers every query with its only position") {
  const CsiDataset d = synthetic_dataset(1, 8, 2);
  const FingerprintStore store = build_fingerprint_store(d);
  const CsiDataset probes = synthetic_dataset(5, 8, 3);
  for (const auto& r : probes.records) {
    CHECK(dfpl_locate(store, CsiVector{r.gains}) == d.records[0].position);
  }
}

TEST_CASE("nearest match agrees with an exhaustive scan") {
  const CsiDataset d = synthetic_dataset(50, 12, 9);
  const FingerprintStore store = build_fingerprint_store(d, true);
  const CsiDataset probes = synthetic_dataset(20, 12, 10);
  for (const auto& probe : probes.records) {
    const Eigen::VectorXd q = normalize_csi(probe.gains, store.norm);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < store.size(); ++i) {
      const double dist = (store.features.row(i).transpose() - q).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = i;
      }
    }
    CHECK(dfpl_nearest_index(store, CsiVector{probe.gains}) == best);
  }
}

TEST_CASE("ties break to the lowest record index") {
  CsiDataset d = synthetic_dataset(3, 8, 4);
  d.records[2].gains = d.records[1].gains;  // duplicate fingerprint, different position
  d.records[2].position = Vec2(-1, -1);
  const FingerprintStore store = build_fingerprint_store(d);
  const CsiVector q{d.records[1].gains};
  CHECK(dfpl_nearest_index(store, q) == 1);
}

TEST_CASE("query length must match the store") {
  const CsiDataset d = synthetic_dataset(4, 8, 6);
  const FingerprintStore store = build_fingerprint_store(d);
  const CsiDataset other = synthetic_dataset(1, 16, 7);
  CHECK_THROWS_AS(dfpl_locate(store, CsiVector{other.records[0].gains}), std::invalid_argument);
}

TEST_CASE("raw and normalized stores can rank differently") {
  const CsiDataset d = synthetic_dataset(30, 10, 11);
  const FingerprintStore norm_store = build_fingerprint_store(d, true);
  const FingerprintStore raw_store = build_fingerprint_store(d, false);
  CHECK(norm_store.normalized);
  CHECK_FALSE(raw_store.normalized);
  const CsiDataset probes = synthetic_dataset(50, 10, 12);
  int disagreements = 0;
  for (const auto& probe : probes.records) {
    const CsiVector q{probe.gains};
    if (dfpl_nearest_index(norm_store, q) != dfpl_nearest_index(raw_store, q)) ++disagreements;
  }
  CHECK(disagreements > 0);  // dB standardization reweights the waypoints
}

TEST_CASE("position network reproduces the documented shape chain for N=128") {
  const Model m = make_position_model(128, 1);
  const auto& layers = m.net.layers();
  REQUIRE(layers.size() == 7);
  CHECK(layers[0].out == nn::Shape3{126, 1, 64});
  CHECK(layers[1].out == nn::Shape3{63, 1, 64});
  CHECK(layers[2].out == nn::Shape3{61, 1, 64});
  CHECK(layers[3].out == nn::Shape3{30, 1, 64});
  CHECK(layers[4].out == nn::Shape3{28, 1, 64});
  CHECK(layers[5].w_rows == 1792);
  CHECK(m.net.output_dim() == 2);
  CHECK(m.net.input_shape() == nn::Shape3{128, 1, 1});
}

TEST_CASE("zero parameters locate to the origin") {
  Model m = make_position_model(16, 1, 4, 4);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  const CsiDataset d = synthetic_dataset(1, 16, 8);
  CHECK(nfpl_locate(m, CsiVector{d.records[0].gains}) == Vec2(0, 0));
}

TEST_CASE("position prediction is bit-deterministic") {
  Model m = make_position_model(16, 31, 4, 4);
  const CsiDataset d = synthetic_dataset(1, 16, 9);
  m.norm = fit_normalization(d);
  const CsiVector q{d.records[0].gains};
  const Vec2 first = nfpl_locate(m, q);
  for (int k = 0; k < 5; ++k) CHECK(nfpl_locate(m, q) == first);
}

TEST_CASE("batched location matches the scalar path") {
  // batched and single-row passes may differ in the last ulp (gemm vs gemv)
  Model m = make_position_model(12, 3, 4, 4);
  const CsiDataset d = synthetic_dataset(6, 12, 13);
  m.norm = fit_normalization(d);
  const nn::RowMat rows = normalize_dataset(d, m.norm);
  const std::vector<Vec2> batch = nfpl_locate_rows(m, rows);
  for (int i = 0; i < d.size(); ++i) {
    const Vec2 one = nfpl_locate(m, CsiVector{d.records[i].gains});
    CHECK((batch[static_cast<std::size_t>(i)] - one).norm() < 1e-12);
  }
}

TEST_CASE("gradient check passes on the 2-output head") {
  const nn::Network net({8, 1, 1}, {nn::conv(3, 1, 2), nn::pool(2, 1), nn::conv(3, 1, 2),
                                    nn::dense(4, true), nn::dense(2, false)});
  const CsiDataset d = synthetic_dataset(6, 8, 14);
  const Normalization norm = fit_normalization(d);
  const nn::RowMat rows = normalize_dataset(d, norm);
  std::vector<Vec2> targets;
  for (const auto& r : d.records) targets.push_back(r.position);
  PositionObjective obj(net, rows, targets, 1);
  std::vector<double> params = net.init_params(6);
  std::vector<int> batch(static_cast<std::size_t>(d.size()));
  std::iota(batch.begin(), batch.end(), 0);
  const auto result = testing::finite_difference_check(obj, params, batch);
  CAPTURE(result.worst_index);
  CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("training reduces the position loss") {
  // structured data: CSI actually depends on the position
  const Scene scene = generate_random_scene(SceneGenConfig{}, 8);
  const Trajectory traj = build_circular_trajectory(Vec3(40, 45, 40), 20.0, 16);
  ChannelModel channel;
  const NodeSet nodes = sample_nodes(scene, 24, 3, 55);
  const CsiDataset d = build_dataset(scene, channel, traj, nodes, 4);

  Model m = make_position_model(16, 2, 8, 16);
  m.norm = fit_normalization(d);
  const nn::RowMat rows = normalize_dataset(d, m.norm);
  std::vector<Vec2> targets;
  for (const auto& r : d.records) targets.push_back(r.position);
  PositionObjective obj(m.net, rows, targets, 1);
  std::vector<int> all(static_cast<std::size_t>(d.size()));
  std::iota(all.begin(), all.end(), 0);
  const double before = obj.batch_loss(m.params.data(), all);
  nn::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.seed = 3;
  cfg.threads = 1;
  nfpl_train(m, d, cfg);
  const double after = obj.batch_loss(m.params.data(), all);
  CHECK(after < 0.2 * before);
}

TEST_CASE("nfpl pretraining hands over to the finetune normalization") {
  const CsiDataset pre = synthetic_dataset(10, 8, 16);
  const CsiDataset fine = synthetic_dataset(8, 8, 17);
  PretrainConfig cfg;
  cfg.filters = 2;
  cfg.dense_units = 4;
  cfg.pretrain.epochs = 2;
  cfg.finetune.epochs = 2;
  const Model m = nfpl_pretrain_then_finetune(pre, fine, cfg);
  CHECK(m.kind == ModelKind::Position);
  const Normalization expect = fit_normalization(fine);
  CHECK(m.norm.mean_db == expect.mean_db);
}
