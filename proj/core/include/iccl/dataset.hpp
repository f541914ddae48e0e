#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "iccl/propagation.hpp"
#include "iccl/scene.hpp"

namespace iccl {

struct CsiRecord {
  Vec2 position = Vec2::Zero();
  Eigen::VectorXd gains;  // linear power gains, one per waypoint
};

// A labelled CSI collection measured at known ground positions.
struct CsiDataset {
  int n_waypoints = 0;
  std::uint64_t scene_id = 0;   // hash of the generating scene
  double noise_power = 0.0;     // sigma^2 used when measuring
  std::vector<CsiRecord> records;

  int size() const { return static_cast<int>(records.size()); }
};

// Measures one CSI vector per node. Deterministic per seed.
CsiDataset build_dataset(const Scene& scene, const ChannelModel& model, const Trajectory& traj,
                         const NodeSet& nodes, std::uint64_t seed);

// Columnar serialization. CSV is the canonical diffable format; the binary
// variant stores the same rows as little-endian 64-bit floats. Dispatch is by
// extension: ".csv" vs anything else (conventionally ".bin").
void save_dataset(const CsiDataset& d, const std::string& path);
CsiDataset load_dataset(const std::string& path);

void save_dataset_csv(const CsiDataset& d, std::ostream& out);
CsiDataset load_dataset_csv(std::istream& in);
void save_dataset_bin(const CsiDataset& d, std::ostream& out);
CsiDataset load_dataset_bin(std::istream& in);

// Largest gain entry across all records; reference point for SNR-based noise
// sweeps. Throws std::invalid_argument on an empty dataset.
double max_gain(const CsiDataset& d);

}  // namespace iccl
