#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "iccl/harness.hpp"

using namespace iccl;

namespace {

// A deliberately small end-to-end configuration: tiny nets, short training,
// few realizations. Exercises the same code paths as the full replication.
ExperimentConfig mini_config() {
  ExperimentConfig cfg;
  SceneGenConfig gen;
  gen.n_buildings = 3;
  cfg.scene = generate_random_scene(gen, 101);
  cfg.pretrain_scene = generate_random_scene(gen, 202);
  cfg.trajectory = build_circular_trajectory(Vec3(40, 45, 40), 20.0, 16);
  cfg.m0_train = 24;
  cfg.m0_pretrain = 30;
  cfg.m_total = 14;
  cfg.anchor_counts = {3, 5};
  cfg.fixed_anchor_count = 5;
  cfg.noise_snr_db = {40, 10};
  cfg.anchor_sweep_snr_db = {40};
  cfg.realizations = 4;
  cfg.master_seed = 11;
  cfg.train.filters = 4;
  cfg.train.dense_units = 8;
  cfg.train.pretrain.epochs = 2;
  cfg.train.pretrain.batch_size = 64;
  cfg.train.finetune.epochs = 2;
  cfg.train.finetune.batch_size = 64;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("rmse matches hand-computed cases") {
  const std::vector<Vec2> truth = {{1, 1}, {2, 2}};
  CHECK(rmse(truth, truth) == 0.0);

  const std::vector<Vec2> est = {{4, 5}};
  const std::vector<Vec2> t2 = {{1, 1}};
  CHECK(rmse(est, t2) == doctest::Approx(5.0).epsilon(1e-12));  // 3-4-5 triangle

  const std::vector<Vec2> est3 = {{0, 0}, {10, 0}};
  const std::vector<Vec2> t3 = {{0, 0}, {0, 0}};
  CHECK(rmse(est3, t3) == doctest::Approx(std::sqrt(50.0)).epsilon(1e-12));

  CHECK_THROWS_AS(rmse(est, truth), std::invalid_argument);
  CHECK_THROWS_AS(rmse(std::vector<Vec2>{}, std::vector<Vec2>{}), std::invalid_argument);
}

TEST_CASE("noise power follows the SNR definition") {
  ChannelModel m;  // 30 dBm -> 1 W per symbol
  CHECK(noise_power_for_snr(0.0, 1e-7, m) == doctest::Approx(1e-7).epsilon(1e-12));
  CHECK(noise_power_for_snr(10.0, 1e-7, m) == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(noise_power_for_snr(40.0, 1e-7, m) == doctest::Approx(1e-11).epsilon(1e-12));
  CHECK_THROWS_AS(noise_power_for_snr(0.0, 0.0, m), std::invalid_argument);
}

TEST_CASE("result csv emission is the documented schema") {
  SweepResult result;
  result.rows.push_back({"iccl", 7, 1e-10, 9.25, 0.125, 100, 0.0});
  result.rows.push_back({"dfpl", 20, 1e-8, 14.5, 0.5, 100, 0.01});
  const std::string expect =
      "algorithm,m_a,noise_power_dbm,rmse_m,stderr_m,n_realizations,failure_rate\n"
      "iccl,7,-70,9.25,0.125,100,0\n"
      "dfpl,20,-50,14.5,0.5,100,0.01\n";
  CHECK(results_csv(result) == expect);
}

TEST_CASE("result csv parses back") {
  SweepResult result;
  result.rows.push_back({"iccl", 7, 1e-10, 9.25, 0.125, 100, 0.0});
  result.rows.push_back({"nfpl", 20, 2.5e-9, 44.0, 1.5, 50, 0.02});
  std::istringstream in(results_csv(result));
  const SweepResult back = parse_results_csv(in);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].algorithm == "iccl");
  CHECK(back.rows[0].m_a == 7);
  CHECK(back.rows[0].noise_power == doctest::Approx(1e-10).epsilon(1e-9));
  CHECK(back.rows[1].rmse_m == doctest::Approx(44.0));
  CHECK(back.rows[1].n_realizations == 50);
}

TEST_CASE("plot data groups anchor sweeps by noise level") {
  SweepResult result;
  result.rows.push_back({"iccl", 3, 1e-10, 20.0, 1.0, 10, 0.0});
  result.rows.push_back({"iccl", 7, 1e-10, 10.0, 0.5, 10, 0.0});
  result.rows.push_back({"iccl", 3, 1e-8, 30.0, 1.0, 10, 0.0});
  result.rows.push_back({"iccl", 7, 1e-8, 18.0, 0.5, 10, 0.0});
  std::ostringstream out;
  emit_plot_data(result, out);
  const std::string expect =
      "# algorithm=iccl noise_power_dbm=-70 x=m_a\n"
      "3 20 1\n"
      "7 10 0.5\n"
      "\n"
      "# algorithm=iccl noise_power_dbm=-50 x=m_a\n"
      "3 30 1\n"
      "7 18 0.5\n";
  CHECK(out.str() == expect);
}

TEST_CASE("plot data groups noise sweeps by algorithm") {
  SweepResult result;
  result.rows.push_back({"iccl", 20, 1e-10, 5.0, 0.2, 10, 0.0});
  result.rows.push_back({"dfpl", 20, 1e-10, 8.0, 0.2, 10, 0.0});
  result.rows.push_back({"iccl", 20, 1e-9, 7.0, 0.2, 10, 0.0});
  result.rows.push_back({"dfpl", 20, 1e-9, 9.0, 0.2, 10, 0.0});
  std::ostringstream out;
  emit_plot_data(result, out);
  const std::string expect =
      "# algorithm=iccl m_a=20 x=noise_power_dbm\n"
      "-70 5 0.2\n"
      "-60 7 0.2\n"
      "\n"
      "# algorithm=dfpl m_a=20 x=noise_power_dbm\n"
      "-70 8 0.2\n"
      "-60 9 0.2\n";
  CHECK(out.str() == expect);
}

TEST_CASE("experiment validation rejects bad grids") {
  ExperimentConfig cfg = mini_config();
  cfg.m_total = 5;  // not above the largest anchor count
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

  cfg = mini_config();
  cfg.anchor_counts = {2, 5};
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

  cfg = mini_config();
  cfg.noise_snr_db.clear();
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

  cfg = mini_config();
  cfg.algorithms = {"iccl", "mystery"};
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);

  cfg = mini_config();
  cfg.realizations = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("paired-seed evaluation is byte-reproducible end to end") {
  const ExperimentConfig cfg = mini_config();
  const TrainedAlgorithms algos = train_all(cfg);

  const SweepResult noise_a = sweep_noise(cfg, algos);
  const SweepResult noise_b = sweep_noise(cfg, algos);
  CHECK(results_csv(noise_a) == results_csv(noise_b));

  const SweepResult anchors_a = sweep_anchors(cfg, algos);
  const SweepResult anchors_b = sweep_anchors(cfg, algos);
  CHECK(results_csv(anchors_a) == results_csv(anchors_b));

  // expected row layout: algorithms x noise grid, anchors x noise grid
  CHECK(noise_a.rows.size() == cfg.algorithms.size() * cfg.noise_snr_db.size());
  CHECK(anchors_a.rows.size() == cfg.anchor_counts.size() * cfg.anchor_sweep_snr_db.size());
  for (const auto& row : noise_a.rows) {
    CHECK(row.n_realizations == cfg.realizations);
    CHECK(row.failure_rate == 0.0);
    CHECK(std::isfinite(row.rmse_m));
  }

  // a different master seed must actually change the numbers
  ExperimentConfig other = cfg;
  other.master_seed = 12;
  const SweepResult noise_c = sweep_noise(other, algos);
  CHECK(results_csv(noise_c) != results_csv(noise_a));
}

TEST_CASE("thread count does not change evaluation results") {
  ExperimentConfig cfg = mini_config();
  const TrainedAlgorithms algos = train_all(cfg);
  const SweepResult two = sweep_noise(cfg, algos);
  cfg.threads = 1;
  const SweepResult one = sweep_noise(cfg, algos);
  CHECK(results_csv(one) == results_csv(two));
}
