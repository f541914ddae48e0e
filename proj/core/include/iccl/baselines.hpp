#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "iccl/dataset.hpp"
#include "iccl/regressor.hpp"

namespace iccl {

// Stored training records for nearest-neighbor fingerprinting. Queries are
// matched either on the learners' normalized dB representation or on the
// plain linear gains.
struct FingerprintStore {
  nn::RowMat features;  // one row per record
  std::vector<Vec2> positions;
  bool normalized = true;
  Normalization norm;

  int size() const { return static_cast<int>(positions.size()); }
};

FingerprintStore build_fingerprint_store(const CsiDataset& data, bool normalized = true);

// Index of the record with the smallest Euclidean feature distance; ties go
// to the lowest index.
int dfpl_nearest_index(const FingerprintStore& store, const CsiVector& query);
Vec2 dfpl_locate(const FingerprintStore& store, const CsiVector& query);

// Position network: same convolutional stack as the distance subnetwork with
// 3x1 kernels and a 2-unit head, trained on single CSI vectors.
class PositionObjective : public nn::SupervisedObjective {
 public:
  PositionObjective(const nn::Network& net, const nn::RowMat& csi_rows,
                    const std::vector<Vec2>& targets, int threads = 0);
  ~PositionObjective() override;

  int example_count() const override;
  std::size_t param_count() const override;
  double batch_loss_grad(const double* params, std::span<const int> batch,
                         double* grad) override;
  double batch_loss(const double* params, std::span<const int> batch) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Minimizes mean ||p_hat - p||^2 with the same trainer as the distance model.
nn::TrainTrace nfpl_train(Model& m, const CsiDataset& data, const nn::TrainConfig& cfg);

Vec2 nfpl_locate(const Model& m, const CsiVector& query);
// Batched variant over pre-normalized rows.
std::vector<Vec2> nfpl_locate_rows(const Model& m, const nn::RowMat& rows);

Model nfpl_pretrain_then_finetune(const CsiDataset& pretrain_data,
                                  const CsiDataset& finetune_data, const PretrainConfig& cfg);

}  // namespace iccl
