#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "iccl/baselines.hpp"
#include "iccl/dataset.hpp"
#include "iccl/multilateration.hpp"
#include "iccl/regressor.hpp"
#include "iccl/scene.hpp"

namespace iccl {

// Full replication run: environments, dataset sizes, evaluation grids and the
// seeding scheme. Every Monte-Carlo cell derives its random stream from
// (master_seed, noise index, realization index), so algorithms are compared
// on identical node sets and measurement noise.
struct ExperimentConfig {
  Scene scene;
  Scene pretrain_scene;
  Trajectory trajectory;
  ChannelModel channel;  // noise_power here is ignored; sweeps set it per cell

  int m0_train = 200;
  int m0_pretrain = 1000;
  std::uint64_t data_seed = 7;

  int m_total = 100;
  std::vector<int> anchor_counts = {3, 5, 7, 10, 20};
  int fixed_anchor_count = 20;
  // Noise grids as per-sample SNR (dB) at the strongest training-set gain.
  std::vector<double> noise_snr_db = {40, 35, 30, 25, 20, 15, 10, 5, 0};
  std::vector<double> anchor_sweep_snr_db = {40, 20, 0};
  int realizations = 100;
  std::uint64_t master_seed = 1;
  std::vector<std::string> algorithms = {"iccl", "dfpl", "dfpl_raw", "nfpl"};
  bool refine_positions = true;

  PretrainConfig train;
  int threads = 0;
};

void validate(const ExperimentConfig& cfg);

// Root mean square Euclidean position error.
double rmse(std::span<const Vec2> estimates, std::span<const Vec2> truths);

// sigma^2 giving the requested per-sample SNR at the reference gain:
// sigma^2 = g_ref * P_tx / 10^(snr/10).
double noise_power_for_snr(double snr_db, double reference_gain, const ChannelModel& model);

struct SweepRow {
  std::string algorithm;
  int m_a = 0;
  double noise_power = 0.0;  // sigma^2, linear watts
  double rmse_m = 0.0;
  double stderr_m = 0.0;
  int n_realizations = 0;
  double failure_rate = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Everything the evaluation sweeps consume.
struct TrainedAlgorithms {
  Model iccl;
  Model nfpl;
  FingerprintStore store_norm;
  FingerprintStore store_raw;
  CsiDataset train_data;    // noiseless training set; also the fingerprint source
  double reference_gain;    // strongest gain in train_data
};

CsiDataset make_training_dataset(const ExperimentConfig& cfg);
CsiDataset make_pretraining_dataset(const ExperimentConfig& cfg);

// Generates both datasets and trains ICCL and NFPL (pretrain + fine-tune).
TrainedAlgorithms train_all(const ExperimentConfig& cfg);

// Assembles the evaluation bundle around an already-trained distance model.
TrainedAlgorithms assemble(Model iccl_model, Model nfpl_model, CsiDataset train_data);

// RMSE of ICCL over the (anchor count x noise) grid.
SweepResult sweep_anchors(const ExperimentConfig& cfg, const TrainedAlgorithms& algos);

// RMSE of the configured algorithms vs noise at the fixed anchor count.
SweepResult sweep_noise(const ExperimentConfig& cfg, const TrainedAlgorithms& algos);

// CSV with one row per (algorithm, sweep point). Byte-stable for fixed input.
void emit_results(const SweepResult& result, std::ostream& out);
std::string results_csv(const SweepResult& result);
SweepResult parse_results_csv(std::istream& in);

// Column-oriented plot blocks ("x y yerr", blank-line separated) usable from
// gnuplot or any plotting script.
void emit_plot_data(const SweepResult& result, std::ostream& out);

}  // namespace iccl
