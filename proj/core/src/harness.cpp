#include "iccl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iccl/parallel.hpp"
#include "iccl/rng.hpp"

namespace iccl {

namespace {

constexpr std::uint64_t kStreamTrainNodes = 0x747261696e5f6eULL;
constexpr std::uint64_t kStreamTrainCsi = 0x747261696e5f63ULL;
constexpr std::uint64_t kStreamPreNodes = 0x7072655f6e6f64ULL;
constexpr std::uint64_t kStreamPreCsi = 0x7072655f637369ULL;
constexpr std::uint64_t kStreamEvalNodes = 0x6576616c5f6e6fULL;
constexpr std::uint64_t kStreamEvalCsi = 0x6576616c5f6373ULL;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  validate(cfg.scene);
  validate(cfg.pretrain_scene);
  validate(cfg.trajectory);
  if (cfg.realizations < 1) throw std::invalid_argument("experiment: realization count must be >= 1");
  if (cfg.noise_snr_db.empty() || cfg.anchor_sweep_snr_db.empty() || cfg.anchor_counts.empty()) {
    throw std::invalid_argument("experiment: sweep grids must be non-empty");
  }
  int max_ma = cfg.fixed_anchor_count;
  for (int a : cfg.anchor_counts) max_ma = std::max(max_ma, a);
  if (cfg.m_total <= max_ma) throw std::invalid_argument("experiment: m_total must exceed every anchor count");
  for (int a : cfg.anchor_counts) {
    if (a < 3) throw std::invalid_argument("experiment: anchor counts must be >= 3");
  }
  if (cfg.fixed_anchor_count < 3) throw std::invalid_argument("experiment: fixed anchor count must be >= 3");
  if (cfg.m0_train < 2 || cfg.m0_pretrain < 2) throw std::invalid_argument("experiment: dataset sizes must be >= 2");
  if (cfg.algorithms.empty()) throw std::invalid_argument("experiment: need at least one algorithm");
  for (const auto& a : cfg.algorithms) {
    if (a != "iccl" && a != "dfpl" && a != "dfpl_raw" && a != "nfpl") {
      throw std::invalid_argument("experiment: unknown algorithm '" + a + "'");
    }
  }
}

double rmse(std::span<const Vec2> estimates, std::span<const Vec2> truths) {
  if (estimates.size() != truths.size() || estimates.empty()) {
    throw std::invalid_argument("rmse: need equally many estimates and truths");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    sum += (estimates[k] - truths[k]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

double noise_power_for_snr(double snr_db, double reference_gain, const ChannelModel& model) {
  if (!(reference_gain > 0.0)) throw std::invalid_argument("noise_power_for_snr: reference gain must be positive");
  const double tx_power = std::pow(10.0, (model.tx_power_dbm - 30.0) / 10.0);
  return reference_gain * tx_power / std::pow(10.0, snr_db / 10.0);
}

CsiDataset make_training_dataset(const ExperimentConfig& cfg) {
  NodeSet nodes = sample_nodes(cfg.scene, cfg.m0_train, 3, derive_seed(cfg.data_seed, kStreamTrainNodes));
  ChannelModel noiseless = cfg.channel;
  noiseless.noise_power = 0.0;  // training data carries exact gains
  return build_dataset(cfg.scene, noiseless, cfg.trajectory, nodes,
                       derive_seed(cfg.data_seed, kStreamTrainCsi));
}

CsiDataset make_pretraining_dataset(const ExperimentConfig& cfg) {
  NodeSet nodes = sample_nodes(cfg.pretrain_scene, cfg.m0_pretrain, 3,
                               derive_seed(cfg.data_seed, kStreamPreNodes));
  ChannelModel noiseless = cfg.channel;
  noiseless.noise_power = 0.0;
  return build_dataset(cfg.pretrain_scene, noiseless, cfg.trajectory, nodes,
                       derive_seed(cfg.data_seed, kStreamPreCsi));
}

TrainedAlgorithms assemble(Model iccl_model, Model nfpl_model, CsiDataset train_data) {
  if (iccl_model.kind != ModelKind::PairDistance) throw std::invalid_argument("assemble: iccl model has wrong kind");
  if (nfpl_model.kind != ModelKind::Position) throw std::invalid_argument("assemble: nfpl model has wrong kind");
  TrainedAlgorithms t{std::move(iccl_model), std::move(nfpl_model),
                      build_fingerprint_store(train_data, true),
                      build_fingerprint_store(train_data, false), std::move(train_data), 0.0};
  t.reference_gain = max_gain(t.train_data);
  return t;
}

TrainedAlgorithms train_all(const ExperimentConfig& cfg) {
  validate(cfg);
  CsiDataset train_data = make_training_dataset(cfg);
  CsiDataset pre_data = make_pretraining_dataset(cfg);
  PretrainConfig train_cfg = cfg.train;
  train_cfg.pretrain.threads = cfg.threads;
  train_cfg.finetune.threads = cfg.threads;
  Model iccl_model = pretrain_then_finetune(pre_data, train_data, train_cfg);
  Model nfpl_model = nfpl_pretrain_then_finetune(pre_data, train_data, train_cfg);
  return assemble(std::move(iccl_model), std::move(nfpl_model), std::move(train_data));
}

// --- evaluation core --------------------------------------------------------

namespace {

struct RealizationData {
  NodeSet nodes;
  nn::RowMat csi_lin;  // m_total x N measured linear gains
};

RealizationData make_realization(const ExperimentConfig& cfg, double noise_power,
                                 std::uint64_t cell_seed) {
  RealizationData r;
  r.nodes = sample_nodes(cfg.scene, cfg.m_total, 3, derive_seed(cell_seed, kStreamEvalNodes));
  ChannelModel model = cfg.channel;
  model.noise_power = noise_power;
  Rng rng = make_rng(cell_seed, kStreamEvalCsi);
  r.csi_lin.resize(cfg.m_total, cfg.trajectory.size());
  for (int i = 0; i < cfg.m_total; ++i) {
    const Vec2& p = r.nodes.positions[static_cast<std::size_t>(i)];
    CsiVector csi = measure_csi(cfg.scene, model, cfg.trajectory, Vec3(p.x(), p.y(), 0.0), rng);
    r.csi_lin.row(i) = csi.gains.transpose();
  }
  return r;
}

nn::RowMat normalize_rows(const nn::RowMat& lin, const Normalization& norm) {
  nn::RowMat out(lin.rows(), lin.cols());
  for (Eigen::Index i = 0; i < lin.rows(); ++i) {
    out.row(i) = normalize_csi(lin.row(i).transpose(), norm).transpose();
  }
  return out;
}

// Mean squared position error of one realization, or NaN on a degenerate
// anchor geometry.
double eval_iccl(const ExperimentConfig& cfg, const TrainedAlgorithms& algos,
                 const RealizationData& r, const nn::RowMat& csi_norm, int m_a) {
  const int nu = cfg.m_total - m_a;
  nn::RowMat a_rows(m_a * nu, csi_norm.cols());
  nn::RowMat b_rows(m_a * nu, csi_norm.cols());
  for (int i = 0; i < m_a; ++i) {
    for (int j = 0; j < nu; ++j) {
      a_rows.row(i * nu + j) = csi_norm.row(i);
      b_rows.row(i * nu + j) = csi_norm.row(m_a + j);
    }
  }
  const Eigen::VectorXd d = predict_distances(algos.iccl, a_rows, b_rows);
  Eigen::MatrixXd dist(m_a, nu);
  for (int i = 0; i < m_a; ++i) {
    for (int j = 0; j < nu; ++j) dist(i, j) = d[i * nu + j];
  }
  LocalizeOptions opts;
  opts.refine = cfg.refine_positions;
  std::span<const Vec2> anchors(r.nodes.positions.data(), static_cast<std::size_t>(m_a));
  const auto outcomes = localize_all(anchors, dist, opts);
  double sum = 0.0;
  for (int j = 0; j < nu; ++j) {
    if (outcomes[static_cast<std::size_t>(j)].failed) return std::numeric_limits<double>::quiet_NaN();
    const Vec2& truth = r.nodes.positions[static_cast<std::size_t>(m_a + j)];
    sum += (outcomes[static_cast<std::size_t>(j)].estimate.position - truth).squaredNorm();
  }
  return sum / nu;
}

double eval_dfpl(const TrainedAlgorithms& algos, bool raw, const ExperimentConfig& cfg,
                 const RealizationData& r, int m_a) {
  const FingerprintStore& store = raw ? algos.store_raw : algos.store_norm;
  const int nu = cfg.m_total - m_a;
  double sum = 0.0;
  CsiVector query;
  for (int j = 0; j < nu; ++j) {
    query.gains = r.csi_lin.row(m_a + j).transpose();
    const Vec2 est = dfpl_locate(store, query);
    sum += (est - r.nodes.positions[static_cast<std::size_t>(m_a + j)]).squaredNorm();
  }
  return sum / nu;
}

double eval_nfpl(const TrainedAlgorithms& algos, const ExperimentConfig& cfg,
                 const RealizationData& r, const nn::RowMat& csi_norm_nfpl, int m_a) {
  const int nu = cfg.m_total - m_a;
  const nn::RowMat rows = csi_norm_nfpl.bottomRows(nu);
  const std::vector<Vec2> est = nfpl_locate_rows(algos.nfpl, rows);
  double sum = 0.0;
  for (int j = 0; j < nu; ++j) {
    sum += (est[static_cast<std::size_t>(j)] - r.nodes.positions[static_cast<std::size_t>(m_a + j)])
               .squaredNorm();
  }
  return sum / nu;
}

struct CellStats {
  double rmse = 0.0;
  double stderr_m = 0.0;
  int n_ok = 0;
  double failure_rate = 0.0;
};

// Aggregates per-realization mean squared errors; NaN entries count as failures.
CellStats aggregate(std::span<const double> per_realization_mse) {
  CellStats s;
  const int total = static_cast<int>(per_realization_mse.size());
  double sum = 0.0, sum_sq = 0.0;
  for (double m : per_realization_mse) {
    if (std::isnan(m)) continue;
    sum += m;
    sum_sq += m * m;
    ++s.n_ok;
  }
  s.failure_rate = total > 0 ? static_cast<double>(total - s.n_ok) / total : 0.0;
  if (s.n_ok == 0) {
    s.rmse = std::numeric_limits<double>::quiet_NaN();
    s.stderr_m = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double mean = sum / s.n_ok;
  s.rmse = std::sqrt(mean);
  if (s.n_ok > 1 && s.rmse > 0.0) {
    const double var = std::max(0.0, (sum_sq - s.n_ok * mean * mean) / (s.n_ok - 1));
    // delta method: se(sqrt(x)) ~ se(x) / (2 sqrt(x))
    s.stderr_m = std::sqrt(var / s.n_ok) / (2.0 * s.rmse);
  }
  return s;
}

}  // namespace

SweepResult sweep_anchors(const ExperimentConfig& cfg, const TrainedAlgorithms& algos) {
  validate(cfg);
  SweepResult result;
  for (std::size_t noise_idx = 0; noise_idx < cfg.anchor_sweep_snr_db.size(); ++noise_idx) {
    const double sigma2 =
        noise_power_for_snr(cfg.anchor_sweep_snr_db[noise_idx], algos.reference_gain, cfg.channel);
    // one realization grid shared by every anchor count
    std::vector<std::vector<double>> mse(cfg.anchor_counts.size(),
                                         std::vector<double>(cfg.realizations, 0.0));
    parallel_blocks(cfg.realizations, cfg.threads, [&](int, int begin, int end) {
      for (int r = begin; r < end; ++r) {
        const std::uint64_t cell_seed = derive_seed(cfg.master_seed, 0x616e63686f7273ULL + noise_idx, r);
        const RealizationData data = make_realization(cfg, sigma2, cell_seed);
        const nn::RowMat csi_norm = normalize_rows(data.csi_lin, algos.iccl.norm);
        for (std::size_t ai = 0; ai < cfg.anchor_counts.size(); ++ai) {
          mse[ai][static_cast<std::size_t>(r)] =
              eval_iccl(cfg, algos, data, csi_norm, cfg.anchor_counts[ai]);
        }
      }
    });
    for (std::size_t ai = 0; ai < cfg.anchor_counts.size(); ++ai) {
      const CellStats s = aggregate(mse[ai]);
      result.rows.push_back({"iccl", cfg.anchor_counts[ai], sigma2, s.rmse, s.stderr_m, s.n_ok,
                             s.failure_rate});
    }
  }
  return result;
}

SweepResult sweep_noise(const ExperimentConfig& cfg, const TrainedAlgorithms& algos) {
  validate(cfg);
  SweepResult result;
  const int m_a = cfg.fixed_anchor_count;
  for (std::size_t noise_idx = 0; noise_idx < cfg.noise_snr_db.size(); ++noise_idx) {
    const double sigma2 =
        noise_power_for_snr(cfg.noise_snr_db[noise_idx], algos.reference_gain, cfg.channel);
    std::vector<std::vector<double>> mse(cfg.algorithms.size(),
                                         std::vector<double>(cfg.realizations, 0.0));
    parallel_blocks(cfg.realizations, cfg.threads, [&](int, int begin, int end) {
      for (int r = begin; r < end; ++r) {
        const std::uint64_t cell_seed = derive_seed(cfg.master_seed, 0x6e6f697365ULL + noise_idx, r);
        const RealizationData data = make_realization(cfg, sigma2, cell_seed);
        for (std::size_t ai = 0; ai < cfg.algorithms.size(); ++ai) {
          const std::string& algo = cfg.algorithms[ai];
          double& slot = mse[ai][static_cast<std::size_t>(r)];
          if (algo == "iccl") {
            const nn::RowMat csi_norm = normalize_rows(data.csi_lin, algos.iccl.norm);
            slot = eval_iccl(cfg, algos, data, csi_norm, m_a);
          } else if (algo == "dfpl") {
            slot = eval_dfpl(algos, false, cfg, data, m_a);
          } else if (algo == "dfpl_raw") {
            slot = eval_dfpl(algos, true, cfg, data, m_a);
          } else {
            const nn::RowMat csi_norm = normalize_rows(data.csi_lin, algos.nfpl.norm);
            slot = eval_nfpl(algos, cfg, data, csi_norm, m_a);
          }
        }
      }
    });
    for (std::size_t ai = 0; ai < cfg.algorithms.size(); ++ai) {
      const CellStats s = aggregate(mse[ai]);
      result.rows.push_back(
          {cfg.algorithms[ai], m_a, sigma2, s.rmse, s.stderr_m, s.n_ok, s.failure_rate});
    }
  }
  return result;
}

// --- result serialization ---------------------------------------------------

namespace {

double noise_power_dbm(double sigma2) {
  if (sigma2 <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sigma2) + 30.0;
}

}  // namespace

void emit_results(const SweepResult& result, std::ostream& out) {
  out << "algorithm,m_a,noise_power_dbm,rmse_m,stderr_m,n_realizations,failure_rate\n";
  for (const auto& row : result.rows) {
    out << row.algorithm << ',' << row.m_a << ',' << fmt_double(noise_power_dbm(row.noise_power))
        << ',' << fmt_double(row.rmse_m) << ',' << fmt_double(row.stderr_m) << ','
        << row.n_realizations << ',' << fmt_double(row.failure_rate) << '\n';
  }
}

std::string results_csv(const SweepResult& result) {
  std::ostringstream out;
  emit_results(result, out);
  return out.str();
}

SweepResult parse_results_csv(std::istream& in) {
  SweepResult result;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("results csv: empty input");
  if (line.rfind("algorithm,", 0) != 0) throw std::runtime_error("results csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    SweepRow row;
    std::getline(ls, row.algorithm, ',');
    std::getline(ls, cell, ',');
    row.m_a = std::stoi(cell);
    std::getline(ls, cell, ',');
    const double dbm = std::stod(cell);
    row.noise_power = std::isinf(dbm) ? 0.0 : std::pow(10.0, (dbm - 30.0) / 10.0);
    std::getline(ls, cell, ',');
    row.rmse_m = std::stod(cell);
    std::getline(ls, cell, ',');
    row.stderr_m = std::stod(cell);
    std::getline(ls, cell, ',');
    row.n_realizations = std::stoi(cell);
    std::getline(ls, cell, ',');
    row.failure_rate = std::stod(cell);
    result.rows.push_back(row);
  }
  return result;
}

void emit_plot_data(const SweepResult& result, std::ostream& out) {
  // Blocks of "x y yerr". If an algorithm's rows span several anchor counts,
  // the x axis is the anchor count (one block per noise level); otherwise it
  // is the noise power in dBm (one block per algorithm and anchor count).
  std::vector<std::pair<std::string, int>> emitted;
  bool first = true;
  for (std::size_t k = 0; k < result.rows.size(); ++k) {
    const auto& row = result.rows[k];
    bool multi_ma = false;
    for (const auto& other : result.rows) {
      if (other.algorithm == row.algorithm && other.m_a != row.m_a) {
        multi_ma = true;
        break;
      }
    }
    if (multi_ma) {
      // block key: (algorithm, noise); emit when first row of the key is seen
      const double key_noise = row.noise_power;
      bool seen = false;
      for (std::size_t p = 0; p < k; ++p) {
        if (result.rows[p].algorithm == row.algorithm &&
            result.rows[p].noise_power == key_noise) {
          seen = true;
          break;
        }
      }
      if (seen) continue;
      if (!first) out << '\n';
      first = false;
      out << "# algorithm=" << row.algorithm
          << " noise_power_dbm=" << fmt_double(noise_power_dbm(key_noise)) << " x=m_a\n";
      for (const auto& r : result.rows) {
        if (r.algorithm == row.algorithm && r.noise_power == key_noise) {
          out << r.m_a << ' ' << fmt_double(r.rmse_m) << ' ' << fmt_double(r.stderr_m) << '\n';
        }
      }
    } else {
      bool seen = false;
      for (const auto& e : emitted) {
        if (e.first == row.algorithm && e.second == row.m_a) {
          seen = true;
          break;
        }
      }
      if (seen) continue;
      emitted.emplace_back(row.algorithm, row.m_a);
      if (!first) out << '\n';
      first = false;
      out << "# algorithm=" << row.algorithm << " m_a=" << row.m_a << " x=noise_power_dbm\n";
      for (const auto& r : result.rows) {
        if (r.algorithm == row.algorithm && r.m_a == row.m_a) {
          out << fmt_double(noise_power_dbm(r.noise_power)) << ' ' << fmt_double(r.rmse_m) << ' '
              << fmt_double(r.stderr_m) << '\n';
        }
      }
    }
  }
}

}  // namespace iccl
