#include "iccl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "iccl/parallel.hpp"

namespace iccl {

FingerprintStore build_fingerprint_store(const CsiDataset& data, bool normalized) {
  if (data.records.empty()) throw std::invalid_argument("fingerprint store: empty dataset");
  FingerprintStore store;
  store.normalized = normalized;
  if (normalized) {
    store.norm = fit_normalization(data);
    store.features = normalize_dataset(data, store.norm);
  } else {
    store.features.resize(data.size(), data.n_waypoints);
    for (int i = 0; i < data.size(); ++i) store.features.row(i) = data.records[i].gains.transpose();
  }
  store.positions.reserve(data.size());
  for (const auto& r : data.records) store.positions.push_back(r.position);
  return store;
}

int dfpl_nearest_index(const FingerprintStore& store, const CsiVector& query) {
  if (store.size() == 0) throw std::invalid_argument("dfpl: empty store");
  if (query.size() != static_cast<int>(store.features.cols())) {
    throw std::invalid_argument("dfpl: query length does not match the store");
  }
  Eigen::RowVectorXd q;
  if (store.normalized) {
    q = normalize_csi(query.gains, store.norm).transpose();
  } else {
    q = query.gains.transpose();
  }
  int best = 0;
  double best_d = (store.features.row(0) - q).squaredNorm();
  for (int i = 1; i < store.size(); ++i) {
    const double d = (store.features.row(i) - q).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = i;
    }
  }
  return best;
}

Vec2 dfpl_locate(const FingerprintStore& store, const CsiVector& query) {
  return store.positions[static_cast<std::size_t>(dfpl_nearest_index(store, query))];
}

// --- NFPL -------------------------------------------------------------------

struct PositionObjective::Impl {
  const nn::Network& net;
  const nn::RowMat& csi;
  const std::vector<Vec2>& targets;
  int threads;

  struct Slot {
    nn::Workspace ws;
    nn::RowMat inputs;
    nn::RowMat d_out;
    std::vector<double> grad;
    double loss = 0.0;
  };
  std::vector<Slot> slots;

  Impl(const nn::Network& net_in, const nn::RowMat& csi_in, const std::vector<Vec2>& targets_in,
       int threads_in)
      : net(net_in), csi(csi_in), targets(targets_in), threads(resolve_thread_count(threads_in)) {
    slots.resize(threads);
  }

  void run_chunk(Slot& slot, const double* params, std::span<const int> batch, int begin,
                 int end, int total, bool with_grad) {
    const int count = end - begin;
    slot.inputs.resize(count, net.input_size());
    for (int k = 0; k < count; ++k) {
      slot.inputs.row(k) = csi.row(batch[static_cast<std::size_t>(begin + k)]);
    }
    net.forward(params, slot.inputs, slot.ws);
    const nn::RowMat& out = slot.ws.output();
    slot.loss = 0.0;
    if (with_grad) slot.d_out.resize(count, 2);
    for (int k = 0; k < count; ++k) {
      const Vec2& t = targets[static_cast<std::size_t>(batch[static_cast<std::size_t>(begin + k)])];
      const double ex = out(k, 0) - t.x();
      const double ey = out(k, 1) - t.y();
      slot.loss += ex * ex + ey * ey;
      if (with_grad) {
        slot.d_out(k, 0) = 2.0 * ex / total;
        slot.d_out(k, 1) = 2.0 * ey / total;
      }
    }
    if (with_grad) {
      if (slot.grad.size() != net.param_count()) slot.grad.assign(net.param_count(), 0.0);
      else std::fill(slot.grad.begin(), slot.grad.end(), 0.0);
      net.backward(params, slot.ws, slot.d_out, slot.grad.data());
    }
  }

  double run(const double* params, std::span<const int> batch, double* grad) {
    const int total = static_cast<int>(batch.size());
    if (total == 0) throw std::invalid_argument("position objective: empty batch");
    const bool with_grad = grad != nullptr;
    parallel_blocks(total, threads, [&](int t, int begin, int end) {
      run_chunk(slots[static_cast<std::size_t>(t)], params, batch, begin, end, total, with_grad);
    });
    double loss = 0.0;
    const int used = std::min(threads, total);
    for (int t = 0; t < used; ++t) {
      loss += slots[static_cast<std::size_t>(t)].loss;
      if (with_grad) {
        const auto& g = slots[static_cast<std::size_t>(t)].grad;
        for (std::size_t k = 0; k < g.size(); ++k) grad[k] += g[k];
      }
    }
    return loss / total;
  }
};

PositionObjective::PositionObjective(const nn::Network& net, const nn::RowMat& csi_rows,
                                     const std::vector<Vec2>& targets, int threads)
    : impl_(std::make_unique<Impl>(net, csi_rows, targets, threads)) {
  if (net.output_dim() != 2) throw std::invalid_argument("position objective: needs a 2-unit head");
  if (csi_rows.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw std::invalid_argument("position objective: row/target count mismatch");
  }
  if (net.input_size() != csi_rows.cols()) {
    throw std::invalid_argument("position objective: network input does not match dataset");
  }
}

PositionObjective::~PositionObjective() = default;

int PositionObjective::example_count() const { return static_cast<int>(impl_->targets.size()); }

std::size_t PositionObjective::param_count() const { return impl_->net.param_count(); }

double PositionObjective::batch_loss_grad(const double* params, std::span<const int> batch,
                                          double* grad) {
  return impl_->run(params, batch, grad);
}

double PositionObjective::batch_loss(const double* params, std::span<const int> batch) {
  return impl_->run(params, batch, nullptr);
}

nn::TrainTrace nfpl_train(Model& m, const CsiDataset& data, const nn::TrainConfig& cfg) {
  if (m.kind != ModelKind::Position) throw std::invalid_argument("nfpl_train: needs a position model");
  if (data.records.empty()) throw std::invalid_argument("nfpl_train: empty dataset");
  const nn::RowMat rows = normalize_dataset(data, m.norm);
  std::vector<Vec2> targets;
  targets.reserve(data.records.size());
  for (const auto& r : data.records) targets.push_back(r.position);
  PositionObjective obj(m.net, rows, targets, cfg.threads);
  return nn::train_adam(obj, m.params, cfg);
}

Vec2 nfpl_locate(const Model& m, const CsiVector& query) {
  if (m.kind != ModelKind::Position) throw std::invalid_argument("nfpl_locate: needs a position model");
  if (query.size() != m.net.input_shape().h) {
    throw std::invalid_argument("nfpl_locate: CSI length does not match the trained waypoint count");
  }
  nn::Workspace ws;
  const Eigen::VectorXd q = normalize_csi(query.gains, m.norm);
  const Eigen::VectorXd out = m.net.forward_one(m.params.data(), q, ws);
  return Vec2(out[0], out[1]);
}

std::vector<Vec2> nfpl_locate_rows(const Model& m, const nn::RowMat& rows) {
  if (m.kind != ModelKind::Position) throw std::invalid_argument("nfpl_locate_rows: needs a position model");
  nn::Workspace ws;
  m.net.forward(m.params.data(), rows, ws);
  std::vector<Vec2> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    out[static_cast<std::size_t>(k)] = Vec2(ws.output()(k, 0), ws.output()(k, 1));
  }
  return out;
}

Model nfpl_pretrain_then_finetune(const CsiDataset& pretrain_data,
                                  const CsiDataset& finetune_data, const PretrainConfig& cfg) {
  if (pretrain_data.n_waypoints != finetune_data.n_waypoints) {
    throw std::invalid_argument("nfpl pretrain: waypoint counts differ");
  }
  Model m = make_position_model(pretrain_data.n_waypoints, cfg.init_seed, cfg.filters,
                                cfg.dense_units);
  m.norm = fit_normalization(pretrain_data);
  nfpl_train(m, pretrain_data, cfg.pretrain);
  m.norm = fit_normalization(finetune_data);
  nfpl_train(m, finetune_data, cfg.finetune);
  return m;
}

}  // namespace iccl
