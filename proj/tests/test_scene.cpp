#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "iccl/errors.hpp"
#include "iccl/scene.hpp"

using namespace iccl;

TEST_CASE("circular trajectory matches the experiment geometry") {
  const Trajectory t = build_circular_trajectory(Vec3(40, 45, 40), 20.0, 128);
  REQUIRE(t.size() == 128);
  CHECK(t.waypoints[0].x() == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(t.waypoints[0].y() == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(t.waypoints[0].z() == doctest::Approx(40.0).epsilon(1e-12));
}

TEST_CASE("four waypoints land on the quarter points") {
  const Trajectory t = build_circular_trajectory(Vec3(40, 45, 40), 20.0, 4);
  REQUIRE(t.size() == 4);
  // waypoint 2 (1-based) sits at 90 degrees
  CHECK(std::abs(t.waypoints[1].x() - 40.0) < 1e-9);
  CHECK(std::abs(t.waypoints[1].y() - 65.0) < 1e-9);
  CHECK(std::abs(t.waypoints[2].x() - 20.0) < 1e-9);
  CHECK(std::abs(t.waypoints[3].y() - 25.0) < 1e-9);
}

TEST_CASE("single waypoint degenerates to center + radius on x") {
  const Trajectory t = build_circular_trajectory(Vec3(10, 20, 30), 5.0, 1);
  REQUIRE(t.size() == 1);
  CHECK(t.waypoints[0].isApprox(Vec3(15, 20, 30), 1e-12));
}

TEST_CASE("waypoints lie exactly on the circle") {
  const Vec3 center(12.5, -3.0, 17.0);
  const double radius = 7.25;
  const Trajectory t = build_circular_trajectory(center, radius, 97);
  for (const auto& w : t.waypoints) {
    CHECK(std::abs((w - center).norm() - radius) < 1e-9);
    CHECK(w.z() == center.z());
  }
}

TEST_CASE("trajectory argument validation") {
  CHECK_THROWS_AS(build_circular_trajectory(Vec3(0, 0, 10), -1.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(build_circular_trajectory(Vec3(0, 0, 10), 0.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(build_circular_trajectory(Vec3(0, 0, 0), 5.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(build_circular_trajectory(Vec3(0, 0, 10), 5.0, 0), std::invalid_argument);
}

namespace {

Scene demo_scene() {
  Scene s;
  s.width = 100.0;
  s.depth = 80.0;
  s.rng_seed = 3;
  s.buildings.push_back({Vec3(10, 10, 0), Vec3(30, 25, 20), 1.0});
  s.buildings.push_back({Vec3(50, 40, 0), Vec3(70, 60, 15), 0.75});
  return s;
}

}  // namespace

TEST_CASE("node sampling is deterministic and respects the support") {
  const Scene s = demo_scene();
  const NodeSet a = sample_nodes(s, 200, 5, 42);
  const NodeSet b = sample_nodes(s, 200, 5, 42);
  REQUIRE(a.size() == 200);
  CHECK(a.num_anchors == 5);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.positions[i] == b.positions[i]);  // bit-identical under the same seed
    CHECK(a.positions[i].x() >= 0.0);
    CHECK(a.positions[i].x() <= s.width);
    CHECK(a.positions[i].y() >= 0.0);
    CHECK(a.positions[i].y() <= s.depth);
    for (const auto& bld : s.buildings) CHECK_FALSE(inside_footprint(bld, a.positions[i]));
  }
  const NodeSet c = sample_nodes(s, 200, 5, 43);
  bool any_differs = false;
  for (int i = 0; i < c.size(); ++i) any_differs |= (c.positions[i] != a.positions[i]);
  CHECK(any_differs);
}

TEST_CASE("empirical mean of uniform sampling hits the area center") {
  Scene s;
  s.width = 100.0;
  s.depth = 80.0;
  const NodeSet nodes = sample_nodes(s, 100000, 3, 7);
  Vec2 mean = Vec2::Zero();
  for (const auto& p : nodes.positions) mean += p;
  mean /= nodes.size();
  CHECK(std::abs(mean.x() - 50.0) < 0.5);
  CHECK(std::abs(mean.y() - 40.0) < 0.5);
}

TEST_CASE("sampling requires at least three anchors") {
  const Scene s = demo_scene();
  CHECK_THROWS_AS(sample_nodes(s, 10, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_nodes(s, 2, 3, 1), std::invalid_argument);
}

TEST_CASE("random scenes never overlap and are reproducible") {
  SceneGenConfig cfg;
  const Scene a = generate_random_scene(cfg, 11);
  const Scene b = generate_random_scene(cfg, 11);
  CHECK(to_text(a) == to_text(b));
  REQUIRE(static_cast<int>(a.buildings.size()) == cfg.n_buildings);
  for (std::size_t i = 0; i < a.buildings.size(); ++i) {
    for (std::size_t j = i + 1; j < a.buildings.size(); ++j) {
      CHECK_FALSE(footprints_overlap(a.buildings[i], a.buildings[j]));
    }
  }
  CHECK_NOTHROW(validate(a));
  const Scene c = generate_random_scene(cfg, 12);
  CHECK(to_text(c) != to_text(a));
}

TEST_CASE("impossible packing reports the retry budget") {
  SceneGenConfig cfg;
  cfg.width = 40.0;
  cfg.depth = 40.0;
  cfg.n_buildings = 40;
  cfg.side_min = 15.0;
  cfg.side_max = 25.0;
  cfg.max_attempts_per_building = 50;
  try {
    generate_random_scene(cfg, 1);
    FAIL("expected PlacementFailure");
  } catch (const PlacementFailure& e) {
    CHECK(e.budget() == 50);
    CHECK(std::string(e.what()).find("50") != std::string::npos);
  }
}

TEST_CASE("scene text round-trips byte-identically") {
  const Scene s = generate_random_scene(SceneGenConfig{}, 5);
  const std::string text = to_text(s);
  std::istringstream in(text);
  const Scene back = parse_scene(in);
  CHECK(to_text(back) == text);
  CHECK(scene_hash(back) == scene_hash(s));
}

TEST_CASE("trajectory text round-trips and accepts circle specs") {
  const Trajectory t = build_circular_trajectory(Vec3(40, 45, 40), 20.0, 16);
  std::istringstream direct(to_text(t));
  const Trajectory back = parse_trajectory(direct);
  REQUIRE(back.size() == t.size());
  for (int k = 0; k < t.size(); ++k) CHECK(back.waypoints[k] == t.waypoints[k]);

  std::istringstream circ("trajectory v1\ncircle 40 45 40 20 16\n");
  const Trajectory from_circle = parse_trajectory(circ);
  REQUIRE(from_circle.size() == 16);
  for (int k = 0; k < t.size(); ++k) CHECK(from_circle.waypoints[k] == t.waypoints[k]);
}

TEST_CASE("scene invariants are enforced") {
  Scene s = demo_scene();
  s.buildings[1].min_corner = Vec3(15, 12, 0);  // overlaps the first building
  s.buildings[1].max_corner = Vec3(35, 30, 10);
  CHECK_THROWS_AS(validate(s), std::invalid_argument);

  Scene outside = demo_scene();
  outside.buildings[0].max_corner.x() = 200.0;
  CHECK_THROWS_AS(validate(outside), std::invalid_argument);

  Scene negative = demo_scene();
  negative.buildings[0].attenuation_db_per_m = -0.5;
  CHECK_THROWS_AS(validate(negative), std::invalid_argument);

  Building flipped{Vec3(5, 5, 0), Vec3(4, 6, 10), 1.0};
  CHECK_THROWS_AS(validate(flipped), std::invalid_argument);
}

TEST_CASE("touching footprints do not count as overlap") {
  Building a{Vec3(0, 0, 0), Vec3(10, 10, 10), 1.0};
  Building b{Vec3(10, 0, 0), Vec3(20, 10, 10), 1.0};
  CHECK_FALSE(footprints_overlap(a, b));
}
