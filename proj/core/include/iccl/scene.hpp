#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace iccl {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Axis-aligned solid box. Radio segments crossing its interior are attenuated
// by `attenuation_db_per_m` per meter of traversed length.
struct Building {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Zero();
  double attenuation_db_per_m = 0.0;
};

// Urban area: a rectangular ground footprint [0,width] x [0,depth] at z = 0
// plus non-overlapping buildings. Immutable by convention after construction.
struct Scene {
  double width = 0.0;
  double depth = 0.0;
  std::vector<Building> buildings;
  std::uint64_t rng_seed = 0;
};

// Ordered broadcast positions of the aerial transmitter. The CSI vector of a
// node has one entry per waypoint.
struct Trajectory {
  std::vector<Vec3> waypoints;
  int size() const { return static_cast<int>(waypoints.size()); }
};

// Ground nodes; the first `num_anchors` entries have known positions.
struct NodeSet {
  std::vector<Vec2> positions;
  int num_anchors = 0;
  int size() const { return static_cast<int>(positions.size()); }
};

// Throws std::invalid_argument if an invariant is violated.
void validate(const Building& b);
void validate(const Scene& s);
void validate(const Trajectory& t);

// Equally angle-spaced waypoints on a horizontal circle, starting on the +x
// axis from the center and proceeding counter-clockwise.
Trajectory build_circular_trajectory(const Vec3& center, double radius, int n_waypoints);

// m positions i.i.d. uniform over the ground footprint excluding building
// interiors; the first m_a are anchors. Deterministic per seed.
NodeSet sample_nodes(const Scene& scene, int m, int m_a, std::uint64_t seed);

struct SceneGenConfig {
  double width = 100.0;
  double depth = 80.0;
  int n_buildings = 8;
  double side_min = 10.0, side_max = 25.0;          // footprint side lengths
  double height_min = 10.0, height_max = 30.0;
  double attenuation_min = 0.5, attenuation_max = 2.0;  // dB/m
  int max_attempts_per_building = 1000;
};

// Rejection-samples non-overlapping buildings. Throws PlacementFailure when
// the per-building attempt budget is exhausted.
Scene generate_random_scene(const SceneGenConfig& cfg, std::uint64_t seed);

// Plain-text serialization (meters, dB/m). The format is line-oriented:
//   scene v1
//   extent <width> <depth>
//   seed <rng_seed>
//   building <xmin> <ymin> <zmin> <xmax> <ymax> <zmax> <atten_db_per_m>
std::string to_text(const Scene& s);
Scene parse_scene(std::istream& in);
void save_scene(const Scene& s, const std::string& path);
Scene load_scene(const std::string& path);

// Trajectory files accept either a circle spec or explicit waypoints:
//   trajectory v1
//   circle <cx> <cy> <cz> <radius> <n>
//   waypoint <x> <y> <z>
std::string to_text(const Trajectory& t);
Trajectory parse_trajectory(std::istream& in);
void save_trajectory(const Trajectory& t, const std::string& path);
Trajectory load_trajectory(const std::string& path);

// FNV-1a over the canonical text serialization; identifies the environment a
// dataset was generated in.
std::uint64_t scene_hash(const Scene& s);

bool footprints_overlap(const Building& a, const Building& b);
bool inside_footprint(const Building& b, const Vec2& p);

}  // namespace iccl
