#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "iccl/rng.hpp"

namespace iccl::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape3 {
  int h = 0, w = 0, c = 0;
  int count() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

enum class LayerKind : std::uint32_t { Conv = 0, Pool = 1, Dense = 2 };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int kh = 0, kw = 0;  // conv kernel or pool window
  int units = 0;       // conv filters / dense units
  bool relu = false;
};

inline LayerSpec conv(int kh, int kw, int filters, bool relu = true) {
  return {LayerKind::Conv, kh, kw, filters, relu};
}
inline LayerSpec pool(int ph, int pw) { return {LayerKind::Pool, ph, pw, 0, false}; }
inline LayerSpec dense(int units, bool relu) { return {LayerKind::Dense, 0, 0, units, relu}; }

// A layer with resolved shapes and parameter placement. Convolution kernels
// wider than the incoming feature map are clamped to its width, so a 3x2
// kernel acts as 3x1 once the width has collapsed to 1.
struct Layer {
  LayerSpec spec;
  Shape3 in, out;
  int kh = 0, kw = 0;            // effective kernel / window
  std::size_t w_off = 0, b_off = 0;
  int w_rows = 0, w_cols = 0;    // weight matrix dims; zero for pool
};

class Workspace;

// Feed-forward stack over (height, width, channels) activations stored
// row-major with channels fastest. Valid padding everywhere; dense layers
// flatten implicitly. Parameters live in one flat vector so optimizers,
// finite-difference checks, and checkpoints can treat them uniformly.
class Network {
 public:
  Network(Shape3 input, std::vector<LayerSpec> specs);

  const Shape3& input_shape() const { return input_; }
  int input_size() const { return input_.count(); }
  int output_dim() const { return layers_.back().out.count(); }
  std::size_t param_count() const { return param_count_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // inputs: (B x input_size). Output lands in ws.output() as (B x output_dim).
  void forward(const double* params, const RowMat& inputs, Workspace& ws) const;

  // d_out: (B x output_dim) gradient of a scalar loss wrt the outputs of the
  // forward pass recorded in ws. Accumulates the loss gradient into grad.
  void backward(const double* params, Workspace& ws, const RowMat& d_out, double* grad) const;

  Eigen::VectorXd forward_one(const double* params, const Eigen::VectorXd& input,
                              Workspace& ws) const;

  // Fan-in-scaled uniform weights, zero biases; deterministic per seed.
  std::vector<double> init_params(std::uint64_t seed) const;

 private:
  Shape3 input_;
  std::vector<Layer> layers_;
  std::size_t param_count_ = 0;
};

// Per-thread scratch for forward/backward passes.
class Workspace {
 public:
  const RowMat& output() const { return acts.back(); }

  std::vector<RowMat> acts;                 // acts[0] = inputs, acts[l+1] = layer l output
  std::vector<RowMat> cols;                 // im2col buffers, conv layers only
  std::vector<std::vector<int>> argmax;     // pool layers only
  std::vector<RowMat> d_acts;
  RowMat d_cols;
  int batch = 0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean per-example loss per epoch
};

// Adaptive-moment gradient descent state over a flat parameter vector.
struct Adam {
  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, const TrainConfig& cfg);

  std::vector<double> m, v;
  std::int64_t t = 0;
};

// A differentiable training objective: mean loss over indexed examples.
// Implementations own their workspaces and may evaluate chunks in parallel;
// gradients must be accumulated in a thread-count-stable order.
class SupervisedObjective {
 public:
  virtual ~SupervisedObjective() = default;
  virtual int example_count() const = 0;
  virtual std::size_t param_count() const = 0;
  // Mean loss over `batch`; adds the gradient of that mean into grad.
  virtual double batch_loss_grad(const double* params, std::span<const int> batch,
                                 double* grad) = 0;
  virtual double batch_loss(const double* params, std::span<const int> batch) = 0;
};

// Mini-batch training loop: shuffles example order per epoch, steps Adam per
// batch, records the epoch loss. Throws TrainingDiverged (with the epoch
// index) when the loss stops being finite. Deterministic per config.
TrainTrace train_adam(SupervisedObjective& objective, std::vector<double>& params,
                      const TrainConfig& cfg);

}  // namespace iccl::nn
