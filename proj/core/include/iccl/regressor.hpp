#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "iccl/dataset.hpp"
#include "iccl/nn.hpp"
#include "iccl/propagation.hpp"
#include "iccl/scene.hpp"

namespace iccl {

// Linear gains are converted to dB with a floor, then standardized with
// statistics of the training set. Raw gains span too many orders of
// magnitude to feed a network directly.
struct Normalization {
  double mean_db = 0.0;
  double std_db = 1.0;
  double floor_db = -150.0;
};

Normalization fit_normalization(const CsiDataset& data, double floor_db = -150.0);
Eigen::VectorXd normalize_csi(const Eigen::VectorXd& linear_gains, const Normalization& norm);
// One normalized row per record.
nn::RowMat normalize_dataset(const CsiDataset& data, const Normalization& norm);

enum class ModelKind : std::uint32_t {
  PairDistance = 0,  // input (N,2,1), scalar distance output
  Position = 1,      // input (N,1,1), 2D position output
};

// A trained network plus the input normalization it was fitted with.
struct Model {
  ModelKind kind;
  nn::Network net;
  std::vector<double> params;
  Normalization norm;
};

// conv(3x2) -> pool(2x1) -> conv(3x2) -> pool(2x1) -> conv(3x1) -> dense -> 1.
// On width-1 feature maps the 3x2 kernels act as 3x1 (width collapse).
std::vector<nn::LayerSpec> distance_stack(int filters = 64, int dense_units = 64);
// Same stack with 3x1 kernels throughout and a 2-unit output head.
std::vector<nn::LayerSpec> position_stack(int filters = 64, int dense_units = 64);

Model make_distance_model(int n_waypoints, std::uint64_t seed, int filters = 64,
                          int dense_units = 64);
Model make_position_model(int n_waypoints, std::uint64_t seed, int filters = 64,
                          int dense_units = 64);

// Versioned checkpoint: header (kind, input dims, layer specs, normalization)
// followed by the flat parameter blob, little-endian 64-bit floats.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

// All unordered record pairs (i < j) of a CSI dataset, with the geographic
// distance between the two measurement positions as the regression target.
class PairDataset {
 public:
  PairDataset(const CsiDataset& data, const Normalization& norm);

  int record_count() const { return static_cast<int>(positions_.size()); }
  std::int64_t pair_count() const { return static_cast<std::int64_t>(pairs_.size()); }
  std::pair<int, int> pair(std::int64_t k) const { return pairs_[static_cast<std::size_t>(k)]; }
  double target(std::int64_t k) const;
  const nn::RowMat& csi() const { return csi_; }
  const std::vector<Vec2>& positions() const { return positions_; }

 private:
  nn::RowMat csi_;  // record_count x N, normalized
  std::vector<Vec2> positions_;
  std::vector<std::pair<int, int>> pairs_;
};

// f_theta applied to the (N x 2) image [normalized a | normalized b].
double subnetwork_forward(const Model& m, const CsiVector& csi_a, const CsiVector& csi_b);

// Order-invariant distance prediction: max(0, (f(a,b) + f(b,a)) / 2). The two
// subnetwork evaluations are identical under argument swap and IEEE addition
// commutes, so the result is bit-identical in both orders.
double predict_distance(const Model& m, const CsiVector& csi_a, const CsiVector& csi_b);
double symmetric_combine(double f_ab, double f_ba);

// Batched prediction for pre-normalized CSI rows; entry k pairs a_rows[k]
// with b_rows[k]. Clamped at zero like predict_distance.
Eigen::VectorXd predict_distances(const Model& m, const nn::RowMat& a_rows,
                                  const nn::RowMat& b_rows);

// Training objective: mean over pairs of (0.5*(f(a,b)+f(b,a)) - distance)^2.
// The clamp of predict_distance is an inference-side guard and is not part of
// the differentiated cost. Batch chunks run data-parallel; gradient reduction
// order is fixed by chunk index.
class PairDistanceObjective : public nn::SupervisedObjective {
 public:
  PairDistanceObjective(const nn::Network& net, const PairDataset& data, int threads = 0);
  ~PairDistanceObjective() override;

  int example_count() const override;
  std::size_t param_count() const override;
  double batch_loss_grad(const double* params, std::span<const int> batch,
                         double* grad) override;
  double batch_loss(const double* params, std::span<const int> batch) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Mean squared prediction error over every pair of the dataset.
double pair_loss(const Model& m, const PairDataset& data);

// Gradient of the mean batch loss; batch entries index into the pair list.
std::vector<double> pair_gradient(const Model& m, const PairDataset& data,
                                  std::span<const int> batch);

nn::TrainTrace train_distance_model(Model& m, const PairDataset& data,
                                    const nn::TrainConfig& cfg);

struct PretrainConfig {
  nn::TrainConfig pretrain{.learning_rate = 1e-3, .epochs = 100};
  nn::TrainConfig finetune{.learning_rate = 1e-4, .epochs = 50};
  std::uint64_t init_seed = 1;
  int filters = 64;
  int dense_units = 64;
};

// Random init, train on the pretraining set, then continue on the target set
// at the (lower) fine-tuning rate. Each phase standardizes with its own
// dataset statistics; the returned model carries the target set's.
Model pretrain_then_finetune(const CsiDataset& pretrain_data, const CsiDataset& finetune_data,
                             const PretrainConfig& cfg);

}  // namespace iccl
