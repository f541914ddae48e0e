#include "iccl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "iccl/errors.hpp"

namespace iccl::nn {

namespace {

using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using ConstRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using MutRowVecMap = Eigen::Map<Eigen::RowVectorXd>;

}  // namespace

Network::Network(Shape3 input, std::vector<LayerSpec> specs) : input_(input) {
  if (input.h < 1 || input.w < 1 || input.c < 1) {
    throw std::invalid_argument("network: input shape must be positive");
  }
  if (specs.empty()) throw std::invalid_argument("network: needs at least one layer");
  Shape3 cur = input;
  std::size_t off = 0;
  bool flattened = false;
  for (const LayerSpec& spec : specs) {
    Layer layer;
    layer.spec = spec;
    layer.in = cur;
    switch (spec.kind) {
      case LayerKind::Conv: {
        if (flattened) throw std::invalid_argument("network: conv after dense is not supported");
        layer.kh = std::min(spec.kh, cur.h);
        layer.kw = std::min(spec.kw, cur.w);  // width collapse
        if (spec.kh < 1 || spec.kw < 1 || spec.units < 1) {
          throw std::invalid_argument("network: bad conv spec");
        }
        layer.out = {cur.h - layer.kh + 1, cur.w - layer.kw + 1, spec.units};
        layer.w_rows = layer.kh * layer.kw * cur.c;
        layer.w_cols = spec.units;
        break;
      }
      case LayerKind::Pool: {
        if (flattened) throw std::invalid_argument("network: pool after dense is not supported");
        if (spec.kh < 1 || spec.kw < 1) throw std::invalid_argument("network: bad pool spec");
        layer.kh = spec.kh;
        layer.kw = spec.kw;
        layer.out = {(cur.h - layer.kh) / layer.kh + 1, (cur.w - layer.kw) / layer.kw + 1, cur.c};
        break;
      }
      case LayerKind::Dense: {
        if (spec.units < 1) throw std::invalid_argument("network: bad dense spec");
        flattened = true;
        layer.out = {1, 1, spec.units};
        layer.w_rows = cur.count();
        layer.w_cols = spec.units;
        break;
      }
    }
    if (layer.out.h < 1 || layer.out.w < 1 || layer.out.c < 1) {
      throw std::invalid_argument("network: a layer output shrank below 1x1x1");
    }
    if (layer.w_rows > 0) {
      layer.w_off = off;
      off += static_cast<std::size_t>(layer.w_rows) * layer.w_cols;
      layer.b_off = off;
      off += static_cast<std::size_t>(layer.w_cols);
    }
    layers_.push_back(layer);
    cur = layer.out;
  }
  param_count_ = off;
}

namespace {

// Gathers convolution patches of one activation matrix into the im2col
// buffer: row (b*oh*ow + oh_i*ow + ow_i) holds the kh x kw x c patch.
void im2col(const RowMat& act, const Layer& l, RowMat& cols) {
  const int b_count = static_cast<int>(act.rows());
  const int oh = l.out.h, ow = l.out.w;
  const int patch = l.kh * l.kw * l.in.c;
  cols.resize(static_cast<Eigen::Index>(b_count) * oh * ow, patch);
  const int row_stride = l.in.w * l.in.c;  // doubles per input row
  const int copy_len = l.kw * l.in.c;
  for (int b = 0; b < b_count; ++b) {
    const double* src = act.data() + static_cast<std::ptrdiff_t>(b) * act.cols();
    double* dst = cols.data() + static_cast<std::ptrdiff_t>(b) * oh * ow * patch;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        for (int ki = 0; ki < l.kh; ++ki) {
          const double* from = src + (i + ki) * row_stride + j * l.in.c;
          std::memcpy(dst, from, sizeof(double) * copy_len);
          dst += copy_len;
        }
      }
    }
  }
}

// Scatter-adds im2col-shaped gradients back onto the input activations.
void col2im_add(const RowMat& d_cols, const Layer& l, RowMat& d_act) {
  const int b_count = static_cast<int>(d_act.rows());
  const int oh = l.out.h, ow = l.out.w;
  const int patch = l.kh * l.kw * l.in.c;
  const int row_stride = l.in.w * l.in.c;
  const int copy_len = l.kw * l.in.c;
  for (int b = 0; b < b_count; ++b) {
    double* dst = d_act.data() + static_cast<std::ptrdiff_t>(b) * d_act.cols();
    const double* src = d_cols.data() + static_cast<std::ptrdiff_t>(b) * oh * ow * patch;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        for (int ki = 0; ki < l.kh; ++ki) {
          double* to = dst + (i + ki) * row_stride + j * l.in.c;
          for (int k = 0; k < copy_len; ++k) to[k] += src[k];
          src += copy_len;
        }
      }
    }
  }
}

}  // namespace

void Network::forward(const double* params, const RowMat& inputs, Workspace& ws) const {
  if (inputs.cols() != input_size()) throw std::invalid_argument("network forward: input width mismatch");
  const int b_count = static_cast<int>(inputs.rows());
  const std::size_t n_layers = layers_.size();
  ws.batch = b_count;
  ws.acts.resize(n_layers + 1);
  ws.cols.resize(n_layers);
  ws.argmax.resize(n_layers);
  ws.acts[0] = inputs;
  for (std::size_t li = 0; li < n_layers; ++li) {
    const Layer& l = layers_[li];
    const RowMat& in = ws.acts[li];
    RowMat& out = ws.acts[li + 1];
    out.resize(b_count, l.out.count());
    switch (l.spec.kind) {
      case LayerKind::Conv: {
        im2col(in, l, ws.cols[li]);
        ConstMap weights(params + l.w_off, l.w_rows, l.w_cols);
        ConstRowVecMap bias(params + l.b_off, l.w_cols);
        MutMap out_rows(out.data(), static_cast<Eigen::Index>(b_count) * l.out.h * l.out.w,
                        l.out.c);
        out_rows.noalias() = ws.cols[li] * weights;
        out_rows.rowwise() += bias;
        break;
      }
      case LayerKind::Pool: {
        auto& idx = ws.argmax[li];
        idx.assign(static_cast<std::size_t>(b_count) * l.out.count(), 0);
        const int in_row_stride = l.in.w * l.in.c;
        const int out_row_stride = l.out.w * l.out.c;
        for (int b = 0; b < b_count; ++b) {
          const double* src = in.data() + static_cast<std::ptrdiff_t>(b) * in.cols();
          double* dst = out.data() + static_cast<std::ptrdiff_t>(b) * out.cols();
          int* am = idx.data() + static_cast<std::ptrdiff_t>(b) * l.out.count();
          for (int i = 0; i < l.out.h; ++i) {
            for (int j = 0; j < l.out.w; ++j) {
              for (int c = 0; c < l.out.c; ++c) {
                int best = (i * l.kh) * in_row_stride + (j * l.kw) * l.in.c + c;
                double best_v = src[best];
                for (int pi = 0; pi < l.kh; ++pi) {
                  for (int pj = 0; pj < l.kw; ++pj) {
                    const int cand =
                        (i * l.kh + pi) * in_row_stride + (j * l.kw + pj) * l.in.c + c;
                    if (src[cand] > best_v) {
                      best_v = src[cand];
                      best = cand;
                    }
                  }
                }
                dst[i * out_row_stride + j * l.out.c + c] = best_v;
                am[i * out_row_stride + j * l.out.c + c] = best;
              }
            }
          }
        }
        break;
      }
      case LayerKind::Dense: {
        ConstMap weights(params + l.w_off, l.w_rows, l.w_cols);
        ConstRowVecMap bias(params + l.b_off, l.w_cols);
        out.noalias() = in * weights;
        out.rowwise() += bias;
        break;
      }
    }
    if (l.spec.relu) out = out.cwiseMax(0.0);
  }
}

void Network::backward(const double* params, Workspace& ws, const RowMat& d_out,
                       double* grad) const {
  const int b_count = ws.batch;
  if (d_out.rows() != b_count || d_out.cols() != output_dim()) {
    throw std::invalid_argument("network backward: d_out shape mismatch");
  }
  const std::size_t n_layers = layers_.size();
  ws.d_acts.resize(n_layers + 1);
  ws.d_acts[n_layers] = d_out;
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& l = layers_[li];
    RowMat& d_cur = ws.d_acts[li + 1];
    RowMat& d_prev = ws.d_acts[li];
    if (l.spec.relu) {
      // relu'(0) is taken as 0; masking on the stored output is equivalent.
      d_cur = (ws.acts[li + 1].array() > 0.0).select(d_cur, 0.0);
    }
    const bool need_d_prev = li > 0;
    switch (l.spec.kind) {
      case LayerKind::Conv: {
        ConstMap weights(params + l.w_off, l.w_rows, l.w_cols);
        MutMap d_w(grad + l.w_off, l.w_rows, l.w_cols);
        MutRowVecMap d_b(grad + l.b_off, l.w_cols);
        ConstMap d_rows(d_cur.data(), static_cast<Eigen::Index>(b_count) * l.out.h * l.out.w,
                        l.out.c);
        d_w.noalias() += ws.cols[li].transpose() * d_rows;
        d_b.noalias() += d_rows.colwise().sum();
        if (need_d_prev) {
          ws.d_cols.resize(d_rows.rows(), l.w_rows);
          ws.d_cols.noalias() = d_rows * weights.transpose();
          d_prev.setZero(b_count, l.in.count());
          col2im_add(ws.d_cols, l, d_prev);
        }
        break;
      }
      case LayerKind::Pool: {
        if (need_d_prev) {
          d_prev.setZero(b_count, l.in.count());
          const auto& idx = ws.argmax[li];
          for (int b = 0; b < b_count; ++b) {
            const double* src = d_cur.data() + static_cast<std::ptrdiff_t>(b) * d_cur.cols();
            double* dst = d_prev.data() + static_cast<std::ptrdiff_t>(b) * d_prev.cols();
            const int* am = idx.data() + static_cast<std::ptrdiff_t>(b) * l.out.count();
            for (int k = 0; k < l.out.count(); ++k) dst[am[k]] += src[k];
          }
        }
        break;
      }
      case LayerKind::Dense: {
        ConstMap weights(params + l.w_off, l.w_rows, l.w_cols);
        MutMap d_w(grad + l.w_off, l.w_rows, l.w_cols);
        MutRowVecMap d_b(grad + l.b_off, l.w_cols);
        d_w.noalias() += ws.acts[li].transpose() * d_cur;
        d_b.noalias() += d_cur.colwise().sum();
        if (need_d_prev) {
          d_prev.resize(b_count, l.in.count());
          d_prev.noalias() = d_cur * weights.transpose();
        }
        break;
      }
    }
  }
}

Eigen::VectorXd Network::forward_one(const double* params, const Eigen::VectorXd& input,
                                     Workspace& ws) const {
  RowMat in(1, input.size());
  in.row(0) = input.transpose();
  forward(params, in, ws);
  return ws.output().row(0).transpose();
}

std::vector<double> Network::init_params(std::uint64_t seed) const {
  std::vector<double> params(param_count_, 0.0);
  Rng rng(splitmix64(seed));
  for (const Layer& l : layers_) {
    if (l.w_rows == 0) continue;
    const int fan_in = l.w_rows;
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    double* w = params.data() + l.w_off;
    const std::size_t count = static_cast<std::size_t>(l.w_rows) * l.w_cols;
    for (std::size_t k = 0; k < count; ++k) w[k] = u(rng);
    // biases stay zero
  }
  return params;
}

void Adam::step(std::span<double> params, std::span<const double> grad, const TrainConfig& cfg) {
  ++t;
  const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double mhat = m[k] / corr1;
    const double vhat = v[k] / corr2;
    params[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

TrainTrace train_adam(SupervisedObjective& objective, std::vector<double>& params,
                      const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (params.size() != objective.param_count()) {
    throw std::invalid_argument("train: parameter vector size mismatch");
  }
  const int n = objective.example_count();
  if (n < 1) throw std::invalid_argument("train: empty dataset");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(params.size(), 0.0);
  Adam adam(params.size());
  TrainTrace trace;
  trace.epoch_loss.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, /*stream=*/0x73687566666c65ULL, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (int begin = 0; begin < n; begin += cfg.batch_size) {
      const int end = std::min(n, begin + cfg.batch_size);
      std::span<const int> batch(order.data() + begin, static_cast<std::size_t>(end - begin));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = objective.batch_loss_grad(params.data(), batch, grad.data());
      loss_sum += loss * (end - begin);
      adam.step(params, grad, cfg);
    }
    const double epoch_loss = loss_sum / n;
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch),
                             epoch);
    }
    trace.epoch_loss.push_back(epoch_loss);
  }
  return trace;
}

}  // namespace iccl::nn
