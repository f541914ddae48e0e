#include "iccl/regressor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "iccl/parallel.hpp"

namespace iccl {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model checkpoint format assumes a little-endian host");

double to_db(double linear, double floor_db) {
  if (linear <= 0.0) return floor_db;
  return std::max(10.0 * std::log10(linear), floor_db);
}

}  // namespace

Normalization fit_normalization(const CsiDataset& data, double floor_db) {
  if (data.records.empty()) throw std::invalid_argument("fit_normalization: empty dataset");
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
  for (const auto& r : data.records) {
    for (int k = 0; k < r.gains.size(); ++k) {
      const double db = to_db(r.gains[k], floor_db);
      sum += db;
      sum_sq += db * db;
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0);
  Normalization norm;
  norm.mean_db = mean;
  norm.std_db = std::sqrt(var) > 0.0 ? std::sqrt(var) : 1.0;
  norm.floor_db = floor_db;
  return norm;
}

Eigen::VectorXd normalize_csi(const Eigen::VectorXd& linear_gains, const Normalization& norm) {
  Eigen::VectorXd out(linear_gains.size());
  for (int k = 0; k < linear_gains.size(); ++k) {
    out[k] = (to_db(linear_gains[k], norm.floor_db) - norm.mean_db) / norm.std_db;
  }
  return out;
}

nn::RowMat normalize_dataset(const CsiDataset& data, const Normalization& norm) {
  nn::RowMat rows(data.size(), data.n_waypoints);
  for (int i = 0; i < data.size(); ++i) {
    rows.row(i) = normalize_csi(data.records[i].gains, norm).transpose();
  }
  return rows;
}

std::vector<nn::LayerSpec> distance_stack(int filters, int dense_units) {
  return {nn::conv(3, 2, filters), nn::pool(2, 1), nn::conv(3, 2, filters), nn::pool(2, 1),
          nn::conv(3, 1, filters), nn::dense(dense_units, true), nn::dense(1, false)};
}

std::vector<nn::LayerSpec> position_stack(int filters, int dense_units) {
  return {nn::conv(3, 1, filters), nn::pool(2, 1), nn::conv(3, 1, filters), nn::pool(2, 1),
          nn::conv(3, 1, filters), nn::dense(dense_units, true), nn::dense(2, false)};
}

Model make_distance_model(int n_waypoints, std::uint64_t seed, int filters, int dense_units) {
  nn::Network net({n_waypoints, 2, 1}, distance_stack(filters, dense_units));
  std::vector<double> params = net.init_params(seed);
  return Model{ModelKind::PairDistance, std::move(net), std::move(params), Normalization{}};
}

Model make_position_model(int n_waypoints, std::uint64_t seed, int filters, int dense_units) {
  nn::Network net({n_waypoints, 1, 1}, position_stack(filters, dense_units));
  std::vector<double> params = net.init_params(seed);
  return Model{ModelKind::Position, std::move(net), std::move(params), Normalization{}};
}

// --- checkpoint io ---------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'I', 'C', 'C', 'L', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::int32_t read_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open '" + path + "'");
  out.write(kModelMagic, sizeof(kModelMagic));
  write_u32(out, kModelVersion);
  write_u32(out, static_cast<std::uint32_t>(m.kind));
  const nn::Shape3& in = m.net.input_shape();
  write_i32(out, in.h);
  write_i32(out, in.w);
  write_i32(out, in.c);
  write_u32(out, static_cast<std::uint32_t>(m.net.layers().size()));
  for (const nn::Layer& l : m.net.layers()) {
    write_u32(out, static_cast<std::uint32_t>(l.spec.kind));
    write_i32(out, l.spec.kh);
    write_i32(out, l.spec.kw);
    write_i32(out, l.spec.units);
    write_u32(out, l.spec.relu ? 1 : 0);
  }
  write_f64(out, m.norm.mean_db);
  write_f64(out, m.norm.std_db);
  write_f64(out, m.norm.floor_db);
  write_u64(out, m.params.size());
  out.write(reinterpret_cast<const char*>(m.params.data()),
            static_cast<std::streamsize>(sizeof(double)) * m.params.size());
  if (!out) throw std::runtime_error("save_model: write failed for '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_model: bad magic in '" + path + "'");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kModelVersion) {
    throw std::runtime_error("load_model: unsupported version " + std::to_string(version));
  }
  const auto kind = static_cast<ModelKind>(read_u32(in));
  nn::Shape3 shape;
  shape.h = read_i32(in);
  shape.w = read_i32(in);
  shape.c = read_i32(in);
  const std::uint32_t n_layers = read_u32(in);
  std::vector<nn::LayerSpec> specs;
  specs.reserve(n_layers);
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    nn::LayerSpec spec;
    spec.kind = static_cast<nn::LayerKind>(read_u32(in));
    spec.kh = read_i32(in);
    spec.kw = read_i32(in);
    spec.units = read_i32(in);
    spec.relu = read_u32(in) != 0;
    specs.push_back(spec);
  }
  Normalization norm;
  norm.mean_db = read_f64(in);
  norm.std_db = read_f64(in);
  norm.floor_db = read_f64(in);
  const std::uint64_t count = read_u64(in);
  if (!in) throw std::runtime_error("load_model: truncated header in '" + path + "'");
  nn::Network net(shape, std::move(specs));
  if (count != net.param_count()) {
    throw std::runtime_error("load_model: parameter count disagrees with architecture");
  }
  std::vector<double> params(count);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(sizeof(double)) * count);
  if (!in) throw std::runtime_error("load_model: truncated parameter blob in '" + path + "'");
  return Model{kind, std::move(net), std::move(params), norm};
}

// --- pair dataset ----------------------------------------------------------

PairDataset::PairDataset(const CsiDataset& data, const Normalization& norm) {
  if (data.size() < 2) throw std::invalid_argument("pair dataset: need at least two records");
  csi_ = normalize_dataset(data, norm);
  positions_.reserve(data.size());
  for (const auto& r : data.records) positions_.push_back(r.position);
  const int m0 = data.size();
  pairs_.reserve(static_cast<std::size_t>(m0) * (m0 - 1) / 2);
  for (int i = 0; i < m0 - 1; ++i) {
    for (int j = i + 1; j < m0; ++j) pairs_.emplace_back(i, j);
  }
}

double PairDataset::target(std::int64_t k) const {
  const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
  return (positions_[i] - positions_[j]).norm();
}

// --- forward ops -----------------------------------------------------------

namespace {

void fill_pair_row(double* row, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(a.size());
  for (int k = 0; k < n; ++k) {
    row[2 * k] = a[k];
    row[2 * k + 1] = b[k];
  }
}

void fill_pair_row(double* row, const nn::RowMat& csi, int i, int j) {
  const int n = static_cast<int>(csi.cols());
  const double* a = csi.data() + static_cast<std::ptrdiff_t>(i) * n;
  const double* b = csi.data() + static_cast<std::ptrdiff_t>(j) * n;
  for (int k = 0; k < n; ++k) {
    row[2 * k] = a[k];
    row[2 * k + 1] = b[k];
  }
}

void check_pair_model(const Model& m, const CsiVector& csi_a, const CsiVector& csi_b) {
  if (m.kind != ModelKind::PairDistance) {
    throw std::invalid_argument("distance prediction requires a pair-distance model");
  }
  const int n = m.net.input_shape().h;
  if (csi_a.size() != n || csi_b.size() != n) {
    throw std::invalid_argument("CSI length does not match the trained waypoint count");
  }
}

}  // namespace

double subnetwork_forward(const Model& m, const CsiVector& csi_a, const CsiVector& csi_b) {
  check_pair_model(m, csi_a, csi_b);
  const Eigen::VectorXd a = normalize_csi(csi_a.gains, m.norm);
  const Eigen::VectorXd b = normalize_csi(csi_b.gains, m.norm);
  nn::RowMat in(1, m.net.input_size());
  fill_pair_row(in.data(), a, b);
  nn::Workspace ws;
  m.net.forward(m.params.data(), in, ws);
  return ws.output()(0, 0);
}

double symmetric_combine(double f_ab, double f_ba) {
  return std::max(0.0, 0.5 * (f_ab + f_ba));
}

double predict_distance(const Model& m, const CsiVector& csi_a, const CsiVector& csi_b) {
  // Each orientation runs through its own single-row forward pass, so the two
  // calls of the swapped order compute the exact same pair of doubles and the
  // commutative addition in symmetric_combine makes the result bit-identical.
  return symmetric_combine(subnetwork_forward(m, csi_a, csi_b),
                           subnetwork_forward(m, csi_b, csi_a));
}

Eigen::VectorXd predict_distances(const Model& m, const nn::RowMat& a_rows,
                                  const nn::RowMat& b_rows) {
  if (m.kind != ModelKind::PairDistance) {
    throw std::invalid_argument("predict_distances requires a pair-distance model");
  }
  if (a_rows.rows() != b_rows.rows() || a_rows.cols() != b_rows.cols() ||
      a_rows.cols() != m.net.input_shape().h) {
    throw std::invalid_argument("predict_distances: row shape mismatch");
  }
  const int count = static_cast<int>(a_rows.rows());
  const int n = static_cast<int>(a_rows.cols());
  // fixed chunk size keeps activation memory bounded and results independent
  // of the total pair count
  constexpr int kChunk = 256;
  Eigen::VectorXd out(count);
  nn::Workspace ws;
  nn::RowMat in;
  for (int begin = 0; begin < count; begin += kChunk) {
    const int end = std::min(count, begin + kChunk);
    in.resize(2 * (end - begin), m.net.input_size());
    for (int k = begin; k < end; ++k) {
      double* fwd = in.data() + static_cast<std::ptrdiff_t>(2 * (k - begin)) * in.cols();
      double* rev = fwd + in.cols();
      for (int t = 0; t < n; ++t) {
        fwd[2 * t] = a_rows(k, t);
        fwd[2 * t + 1] = b_rows(k, t);
        rev[2 * t] = b_rows(k, t);
        rev[2 * t + 1] = a_rows(k, t);
      }
    }
    m.net.forward(m.params.data(), in, ws);
    for (int k = begin; k < end; ++k) {
      out[k] = symmetric_combine(ws.output()(2 * (k - begin), 0),
                                 ws.output()(2 * (k - begin) + 1, 0));
    }
  }
  return out;
}

// --- training objective ----------------------------------------------------

struct PairDistanceObjective::Impl {
  const nn::Network& net;
  const PairDataset& data;
  int threads;

  struct Slot {
    nn::Workspace ws;
    nn::RowMat inputs;
    nn::RowMat d_out;
    std::vector<double> grad;
    double loss = 0.0;
  };
  std::vector<Slot> slots;

  Impl(const nn::Network& net_in, const PairDataset& data_in, int threads_in)
      : net(net_in), data(data_in), threads(resolve_thread_count(threads_in)) {
    slots.resize(threads);
  }

  // Evaluates loss (and optionally the gradient) of one chunk of the batch.
  void run_chunk(Slot& slot, const double* params, std::span<const int> batch, int begin,
                 int end, int total, bool with_grad) {
    const int count = end - begin;
    slot.inputs.resize(2 * count, net.input_size());
    for (int k = 0; k < count; ++k) {
      const auto [i, j] = data.pair(batch[static_cast<std::size_t>(begin + k)]);
      double* fwd = slot.inputs.data() + static_cast<std::ptrdiff_t>(2 * k) * slot.inputs.cols();
      fill_pair_row(fwd, data.csi(), i, j);
      fill_pair_row(fwd + slot.inputs.cols(), data.csi(), j, i);
    }
    net.forward(params, slot.inputs, slot.ws);
    const nn::RowMat& out = slot.ws.output();
    slot.loss = 0.0;
    if (with_grad) slot.d_out.resize(2 * count, 1);
    for (int k = 0; k < count; ++k) {
      const double pred = 0.5 * (out(2 * k, 0) + out(2 * k + 1, 0));
      const double err = pred - data.target(batch[static_cast<std::size_t>(begin + k)]);
      slot.loss += err * err;
      if (with_grad) {
        // d(mean loss)/d f = 2*err/total * 1/2
        slot.d_out(2 * k, 0) = err / total;
        slot.d_out(2 * k + 1, 0) = err / total;
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
    if (total == 0) throw std::invalid_argument("pair objective: empty batch");
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

PairDistanceObjective::PairDistanceObjective(const nn::Network& net, const PairDataset& data,
                                             int threads)
    : impl_(std::make_unique<Impl>(net, data, threads)) {
  if (net.input_shape().w != 2 || net.input_shape().h != static_cast<int>(data.csi().cols())) {
    throw std::invalid_argument("pair objective: network input does not match dataset");
  }
}

PairDistanceObjective::~PairDistanceObjective() = default;

int PairDistanceObjective::example_count() const {
  return static_cast<int>(impl_->data.pair_count());
}

std::size_t PairDistanceObjective::param_count() const { return impl_->net.param_count(); }

double PairDistanceObjective::batch_loss_grad(const double* params, std::span<const int> batch,
                                              double* grad) {
  return impl_->run(params, batch, grad);
}

double PairDistanceObjective::batch_loss(const double* params, std::span<const int> batch) {
  return impl_->run(params, batch, nullptr);
}

double pair_loss(const Model& m, const PairDataset& data) {
  if (data.pair_count() == 0) throw std::invalid_argument("pair_loss: empty dataset");
  PairDistanceObjective obj(m.net, data);
  std::vector<int> all(static_cast<std::size_t>(data.pair_count()));
  std::iota(all.begin(), all.end(), 0);
  return obj.batch_loss(m.params.data(), all);
}

std::vector<double> pair_gradient(const Model& m, const PairDataset& data,
                                  std::span<const int> batch) {
  if (batch.empty()) throw std::invalid_argument("pair_gradient: empty batch");
  PairDistanceObjective obj(m.net, data);
  std::vector<double> grad(m.net.param_count(), 0.0);
  obj.batch_loss_grad(m.params.data(), batch, grad.data());
  return grad;
}

nn::TrainTrace train_distance_model(Model& m, const PairDataset& data,
                                    const nn::TrainConfig& cfg) {
  PairDistanceObjective obj(m.net, data, cfg.threads);
  return nn::train_adam(obj, m.params, cfg);
}

Model pretrain_then_finetune(const CsiDataset& pretrain_data, const CsiDataset& finetune_data,
                             const PretrainConfig& cfg) {
  if (pretrain_data.n_waypoints != finetune_data.n_waypoints) {
    throw std::invalid_argument("pretrain_then_finetune: waypoint counts differ");
  }
  Model m = make_distance_model(pretrain_data.n_waypoints, cfg.init_seed, cfg.filters,
                                cfg.dense_units);
  m.norm = fit_normalization(pretrain_data);
  {
    PairDataset pre(pretrain_data, m.norm);
    train_distance_model(m, pre, cfg.pretrain);
  }
  m.norm = fit_normalization(finetune_data);
  {
    PairDataset fine(finetune_data, m.norm);
    train_distance_model(m, fine, cfg.finetune);
  }
  return m;
}

}  // namespace iccl
