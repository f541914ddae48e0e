// Command-line front end: scene/trajectory generation, dataset synthesis,
// model training, Monte-Carlo evaluation sweeps and report extraction.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "iccl/baselines.hpp"
#include "iccl/harness.hpp"
#include "iccl/regressor.hpp"
#include "iccl/scene.hpp"

using namespace iccl;

namespace {

Trajectory resolve_trajectory(const std::string& path, const std::string& circle) {
  if (!path.empty()) return load_trajectory(path);
  if (!circle.empty()) {
    std::istringstream in("trajectory v1\ncircle " + circle + "\n");
    return parse_trajectory(in);
  }
  throw CLI::ValidationError("trajectory", "provide --trajectory FILE or --circle 'cx cy cz r n'");
}

struct ChannelOptions {
  double reference_gain_db = -40.0;
  double pathloss_exponent = 2.0;
  double tx_power_dbm = 30.0;
  int n_pilot_symbols = 16;

  ChannelModel to_model(double noise_power = 0.0) const {
    ChannelModel m;
    m.reference_gain_db = reference_gain_db;
    m.pathloss_exponent = pathloss_exponent;
    m.tx_power_dbm = tx_power_dbm;
    m.n_pilot_symbols = n_pilot_symbols;
    m.noise_power = noise_power;
    return m;
  }
};

void add_channel_options(CLI::App* cmd, ChannelOptions& opts) {
  cmd->add_option("--ref-gain-db", opts.reference_gain_db, "Gain at 1 m in dB");
  cmd->add_option("--pathloss-exp", opts.pathloss_exponent, "Path-loss exponent");
  cmd->add_option("--tx-dbm", opts.tx_power_dbm, "Per-symbol transmit power in dBm");
  cmd->add_option("--pilot-symbols", opts.n_pilot_symbols, "Pilot sequence length N_p");
}

struct TrainOptions {
  std::string scene_path, traj_path, dataset_path, out_path, init_path, algo = "iccl";
  double lr = 0.0;  // 0 = use the phase default
  int epochs = 0;
  int batch = 256;
  int filters = 64;
  int dense_units = 64;
  std::uint64_t seed = 1;
  int threads = 0;
};

void add_train_options(CLI::App* cmd, TrainOptions& opts, bool allow_init) {
  cmd->add_option("--scene", opts.scene_path, "Scene file the dataset was generated in")
      ->required();
  cmd->add_option("--trajectory", opts.traj_path, "Trajectory file")->required();
  cmd->add_option("--dataset", opts.dataset_path, "CSI dataset (.csv or .bin)")->required();
  cmd->add_option("--out", opts.out_path, "Output model checkpoint")->required();
  cmd->add_option("--algo", opts.algo, "Model to train: iccl or nfpl")
      ->check(CLI::IsMember({"iccl", "nfpl"}));
  if (allow_init) {
    cmd->add_option("--init", opts.init_path, "Checkpoint to continue from");
  }
  cmd->add_option("--lr", opts.lr, "Learning rate (0 = phase default)");
  cmd->add_option("--epochs", opts.epochs, "Epoch count (0 = phase default)");
  cmd->add_option("--batch", opts.batch, "Mini-batch size");
  cmd->add_option("--filters", opts.filters, "Convolution filters per layer");
  cmd->add_option("--dense", opts.dense_units, "Units in the first dense layer");
  cmd->add_option("--train-seed", opts.seed, "Seed for init and shuffling");
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = all cores)");
}

// Shared by `train` and `pretrain`; they differ in defaults and --init.
int run_training(const TrainOptions& opts, bool pretrain_phase) {
  const Scene scene = load_scene(opts.scene_path);
  const Trajectory traj = load_trajectory(opts.traj_path);
  const CsiDataset data = load_dataset(opts.dataset_path);
  if (data.n_waypoints != traj.size()) {
    throw std::runtime_error("dataset waypoint count does not match the trajectory");
  }
  if (data.scene_id != scene_hash(scene)) {
    throw std::runtime_error("dataset was generated in a different scene (hash mismatch)");
  }
  nn::TrainConfig cfg;
  cfg.learning_rate = opts.lr > 0.0 ? opts.lr : (pretrain_phase ? 1e-3 : 1e-4);
  cfg.epochs = opts.epochs > 0 ? opts.epochs : (pretrain_phase ? 100 : 50);
  cfg.batch_size = opts.batch;
  cfg.seed = opts.seed;
  cfg.threads = opts.threads;

  Model model = [&] {
    if (!opts.init_path.empty()) {
      Model m = load_model(opts.init_path);
      const bool want_pair = opts.algo == "iccl";
      if (want_pair != (m.kind == ModelKind::PairDistance)) {
        throw std::runtime_error("--init checkpoint kind does not match --algo");
      }
      return m;
    }
    return opts.algo == "iccl"
               ? make_distance_model(data.n_waypoints, opts.seed, opts.filters, opts.dense_units)
               : make_position_model(data.n_waypoints, opts.seed, opts.filters, opts.dense_units);
  }();
  model.norm = fit_normalization(data);

  nn::TrainTrace trace;
  if (opts.algo == "iccl") {
    const PairDataset pairs(data, model.norm);
    std::printf("training on %lld pairs from %d records\n",
                static_cast<long long>(pairs.pair_count()), data.size());
    trace = train_distance_model(model, pairs, cfg);
  } else {
    std::printf("training on %d records\n", data.size());
    trace = nfpl_train(model, data, cfg);
  }
  for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e) {
    std::printf("epoch %zu: loss %.6g\n", e, trace.epoch_loss[e]);
  }
  save_model(model, opts.out_path);
  std::printf("wrote %s\n", opts.out_path.c_str());
  return 0;
}

std::vector<int> to_int_list(const std::vector<double>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(static_cast<int>(x));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic testbed for CSI-based localization with an aerial transmitter"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a plain-text config file");

  // --- scene gen ---
  auto* scene_cmd = app.add_subcommand("scene", "Scene utilities");
  scene_cmd->require_subcommand(1);
  auto* scene_gen = scene_cmd->add_subcommand("gen", "Generate a random urban scene");
  SceneGenConfig gen_cfg;
  std::uint64_t scene_seed = 1;
  std::string scene_out;
  scene_gen->add_option("--out", scene_out, "Output scene file")->required();
  scene_gen->add_option("--seed", scene_seed, "Generation seed")->required();
  scene_gen->add_option("--width", gen_cfg.width, "Area width in m");
  scene_gen->add_option("--depth", gen_cfg.depth, "Area depth in m");
  scene_gen->add_option("--buildings", gen_cfg.n_buildings, "Building count");
  scene_gen->add_option("--side-min", gen_cfg.side_min, "Min footprint side in m");
  scene_gen->add_option("--side-max", gen_cfg.side_max, "Max footprint side in m");
  scene_gen->add_option("--height-min", gen_cfg.height_min, "Min height in m");
  scene_gen->add_option("--height-max", gen_cfg.height_max, "Max height in m");
  scene_gen->add_option("--atten-min", gen_cfg.attenuation_min, "Min attenuation in dB/m");
  scene_gen->add_option("--atten-max", gen_cfg.attenuation_max, "Max attenuation in dB/m");

  // --- trajectory gen ---
  auto* traj_cmd = app.add_subcommand("trajectory", "Trajectory utilities");
  traj_cmd->require_subcommand(1);
  auto* traj_gen = traj_cmd->add_subcommand("gen", "Generate a circular trajectory");
  std::vector<double> circle_center = {40.0, 45.0, 40.0};
  double circle_radius = 20.0;
  int circle_n = 128;
  std::string traj_out;
  traj_gen->add_option("--out", traj_out, "Output trajectory file")->required();
  traj_gen->add_option("--center", circle_center, "Circle center x y z in m")->expected(3);
  traj_gen->add_option("--radius", circle_radius, "Circle radius in m");
  traj_gen->add_option("--waypoints", circle_n, "Waypoint count N");

  // --- dataset gen ---
  auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
  dataset_cmd->require_subcommand(1);
  auto* dataset_gen = dataset_cmd->add_subcommand("gen", "Measure CSI at random ground nodes");
  std::string ds_scene, ds_traj, ds_circle, ds_out;
  int ds_count = 200;
  double ds_noise = 0.0;
  std::uint64_t ds_seed = 1;
  ChannelOptions ds_channel;
  dataset_gen->add_option("--scene", ds_scene, "Scene file")->required();
  dataset_gen->add_option("--trajectory", ds_traj, "Trajectory file");
  dataset_gen->add_option("--circle", ds_circle, "Inline circle spec: 'cx cy cz r n'");
  dataset_gen->add_option("--count", ds_count, "Number of measurement positions M_0");
  dataset_gen->add_option("--noise-power", ds_noise, "Measurement noise sigma^2 in W");
  dataset_gen->add_option("--seed", ds_seed, "Sampling/measurement seed")->required();
  dataset_gen->add_option("--out", ds_out, "Output dataset (.csv or .bin)")->required();
  add_channel_options(dataset_gen, ds_channel);

  // --- train / pretrain ---
  auto* train_cmd = app.add_subcommand("train", "Train a model on a CSI dataset");
  TrainOptions train_opts;
  add_train_options(train_cmd, train_opts, /*allow_init=*/true);

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Train from scratch at the pretraining rate");
  TrainOptions pretrain_opts;
  add_train_options(pretrain_cmd, pretrain_opts, /*allow_init=*/false);

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo evaluation sweeps");
  std::string ev_scene, ev_traj, ev_circle, ev_model, ev_nfpl, ev_dataset, ev_out, ev_sweep;
  std::uint64_t ev_seed = 0;
  ExperimentConfig ev_cfg;
  ChannelOptions ev_channel;
  std::vector<double> ev_anchors = {3, 5, 7, 10, 20};
  bool ev_no_refine = false;
  eval_cmd->add_option("--scene", ev_scene, "Evaluation scene file")->required();
  eval_cmd->add_option("--trajectory", ev_traj, "Trajectory file");
  eval_cmd->add_option("--circle", ev_circle, "Inline circle spec: 'cx cy cz r n'");
  eval_cmd->add_option("--model", ev_model, "Distance model checkpoint")->required();
  eval_cmd->add_option("--nfpl-model", ev_nfpl, "Position model checkpoint (needed for nfpl)");
  eval_cmd->add_option("--dataset", ev_dataset, "Training dataset (fingerprints + SNR reference)")
      ->required();
  eval_cmd->add_option("--sweep", ev_sweep, "Sweep kind")
      ->check(CLI::IsMember({"anchors", "noise"}))
      ->required();
  eval_cmd->add_option("--seed", ev_seed, "Master seed for the Monte-Carlo streams")->required();
  eval_cmd->add_option("--out", ev_out, "Output results CSV")->required();
  eval_cmd->add_option("--realizations", ev_cfg.realizations, "Monte-Carlo realization count");
  eval_cmd->add_option("--m-total", ev_cfg.m_total, "Nodes per realization (anchors + unknowns)");
  eval_cmd->add_option("--anchors", ev_anchors, "Anchor counts for --sweep anchors")
      ->delimiter(',');
  eval_cmd->add_option("--fixed-anchors", ev_cfg.fixed_anchor_count,
                       "Anchor count for --sweep noise");
  eval_cmd->add_option("--snr", ev_cfg.noise_snr_db, "Noise sweep grid in dB SNR")->delimiter(',');
  eval_cmd
      ->add_option("--anchor-snr", ev_cfg.anchor_sweep_snr_db, "Noise levels for --sweep anchors")
      ->delimiter(',');
  eval_cmd->add_option("--algorithms", ev_cfg.algorithms, "Algorithms for --sweep noise")
      ->delimiter(',');
  eval_cmd->add_flag("--no-refine", ev_no_refine, "Skip the iterative refinement stage");
  eval_cmd->add_option("--threads", ev_cfg.threads, "Worker threads (0 = all cores)");
  add_channel_options(eval_cmd, ev_channel);

  // --- report ---
  auto* report_cmd = app.add_subcommand("report", "Convert a results CSV into plot data");
  std::string rp_results, rp_out;
  report_cmd->add_option("--results", rp_results, "Results CSV from eval")->required();
  report_cmd->add_option("--out", rp_out, "Output plot-data file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (scene_gen->parsed()) {
      const Scene s = generate_random_scene(gen_cfg, scene_seed);
      save_scene(s, scene_out);
      std::printf("wrote %s (%zu buildings, hash %016llx)\n", scene_out.c_str(),
                  s.buildings.size(), static_cast<unsigned long long>(scene_hash(s)));
      return 0;
    }
    if (traj_gen->parsed()) {
      const Trajectory t = build_circular_trajectory(
          Vec3(circle_center[0], circle_center[1], circle_center[2]), circle_radius, circle_n);
      save_trajectory(t, traj_out);
      std::printf("wrote %s (%d waypoints)\n", traj_out.c_str(), t.size());
      return 0;
    }
    if (dataset_gen->parsed()) {
      const Scene s = load_scene(ds_scene);
      const Trajectory t = resolve_trajectory(ds_traj, ds_circle);
      const NodeSet nodes = sample_nodes(s, ds_count, 3, ds_seed);
      const CsiDataset d =
          build_dataset(s, ds_channel.to_model(ds_noise), t, nodes, splitmix64(ds_seed));
      save_dataset(d, ds_out);
      std::printf("wrote %s (%d nodes x %d waypoints, sigma^2 = %g)\n", ds_out.c_str(), d.size(),
                  d.n_waypoints, d.noise_power);
      return 0;
    }
    if (train_cmd->parsed()) return run_training(train_opts, /*pretrain_phase=*/false);
    if (pretrain_cmd->parsed()) return run_training(pretrain_opts, /*pretrain_phase=*/true);
    if (eval_cmd->parsed()) {
      ev_cfg.scene = load_scene(ev_scene);
      ev_cfg.pretrain_scene = ev_cfg.scene;  // unused during evaluation
      ev_cfg.trajectory = resolve_trajectory(ev_traj, ev_circle);
      ev_cfg.channel = ev_channel.to_model();
      ev_cfg.master_seed = ev_seed;
      ev_cfg.anchor_counts = to_int_list(ev_anchors);
      ev_cfg.refine_positions = !ev_no_refine;

      Model iccl_model = load_model(ev_model);
      const bool wants_nfpl = std::find(ev_cfg.algorithms.begin(), ev_cfg.algorithms.end(),
                                        "nfpl") != ev_cfg.algorithms.end();
      Model nfpl_model = (wants_nfpl && ev_sweep == "noise" && !ev_nfpl.empty())
                             ? load_model(ev_nfpl)
                             : make_position_model(ev_cfg.trajectory.size(), 0, 2, 4);
      if (wants_nfpl && ev_sweep == "noise" && ev_nfpl.empty()) {
        throw std::runtime_error("--nfpl-model is required when 'nfpl' is in --algorithms");
      }
      CsiDataset train_data = load_dataset(ev_dataset);
      if (train_data.scene_id != scene_hash(ev_cfg.scene)) {
        throw std::runtime_error("training dataset scene hash does not match --scene");
      }
      if (train_data.n_waypoints != ev_cfg.trajectory.size()) {
        throw std::runtime_error("training dataset waypoint count does not match the trajectory");
      }
      const TrainedAlgorithms algos =
          assemble(std::move(iccl_model), std::move(nfpl_model), std::move(train_data));
      const SweepResult result =
          ev_sweep == "anchors" ? sweep_anchors(ev_cfg, algos) : sweep_noise(ev_cfg, algos);
      std::ofstream out(ev_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open '" + ev_out + "'");
      emit_results(result, out);
      std::printf("wrote %s (%zu rows)\n", ev_out.c_str(), result.rows.size());
      return 0;
    }
    if (report_cmd->parsed()) {
      std::ifstream in(rp_results, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open '" + rp_results + "'");
      const SweepResult result = parse_results_csv(in);
      if (rp_out.empty()) {
        emit_plot_data(result, std::cout);
      } else {
        std::ofstream out(rp_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open '" + rp_out + "'");
        emit_plot_data(result, out);
        std::printf("wrote %s\n", rp_out.c_str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
