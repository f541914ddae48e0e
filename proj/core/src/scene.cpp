#include "iccl/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "iccl/errors.hpp"
#include "iccl/rng.hpp"

namespace iccl {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

void validate(const Building& b) {
  for (int k = 0; k < 3; ++k) {
    if (!(b.min_corner[k] < b.max_corner[k])) {
      fail("building: min_corner must be strictly below max_corner on every axis");
    }
  }
  if (b.attenuation_db_per_m < 0.0) fail("building: attenuation must be >= 0");
}

void validate(const Scene& s) {
  if (s.width <= 0.0 || s.depth <= 0.0) fail("scene: extent must be positive");
  for (const auto& b : s.buildings) {
    validate(b);
    if (b.min_corner.x() < 0.0 || b.min_corner.y() < 0.0 || b.max_corner.x() > s.width ||
        b.max_corner.y() > s.depth) {
      fail("scene: building footprint outside area extent");
    }
  }
  for (size_t i = 0; i < s.buildings.size(); ++i) {
    for (size_t j = i + 1; j < s.buildings.size(); ++j) {
      if (footprints_overlap(s.buildings[i], s.buildings[j])) {
        fail("scene: building footprints overlap");
      }
    }
  }
}

void validate(const Trajectory& t) {
  if (t.waypoints.empty()) fail("trajectory: needs at least one waypoint");
  for (const auto& w : t.waypoints) {
    if (!(w.z() > 0.0)) fail("trajectory: waypoint altitude must be positive");
  }
}

bool footprints_overlap(const Building& a, const Building& b) {
  // Open-interval test: touching edges have zero intersection area.
  return a.min_corner.x() < b.max_corner.x() && b.min_corner.x() < a.max_corner.x() &&
         a.min_corner.y() < b.max_corner.y() && b.min_corner.y() < a.max_corner.y();
}

bool inside_footprint(const Building& b, const Vec2& p) {
  return b.min_corner.x() < p.x() && p.x() < b.max_corner.x() && b.min_corner.y() < p.y() &&
         p.y() < b.max_corner.y();
}

Trajectory build_circular_trajectory(const Vec3& center, double radius, int n_waypoints) {
  if (radius <= 0.0) fail("circular trajectory: radius must be positive");
  if (n_waypoints < 1) fail("circular trajectory: need at least one waypoint");
  if (center.z() <= 0.0) fail("circular trajectory: center altitude must be positive");
  Trajectory t;
  t.waypoints.reserve(n_waypoints);
  for (int k = 0; k < n_waypoints; ++k) {
    double angle = 2.0 * std::numbers::pi * k / n_waypoints;
    t.waypoints.emplace_back(center.x() + radius * std::cos(angle),
                             center.y() + radius * std::sin(angle), center.z());
  }
  return t;
}

NodeSet sample_nodes(const Scene& scene, int m, int m_a, std::uint64_t seed) {
  if (m_a < 3) fail("sample_nodes: at least 3 anchors are required");
  if (m < m_a) fail("sample_nodes: m must be >= m_a");
  validate(scene);
  Rng rng(splitmix64(seed));
  std::uniform_real_distribution<double> ux(0.0, scene.width);
  std::uniform_real_distribution<double> uy(0.0, scene.depth);
  NodeSet nodes;
  nodes.num_anchors = m_a;
  nodes.positions.reserve(m);
  while (nodes.size() < m) {
    Vec2 p(ux(rng), uy(rng));
    bool blocked = false;
    for (const auto& b : scene.buildings) {
      if (inside_footprint(b, p)) {
        blocked = true;
        break;
      }
    }
    if (!blocked) nodes.positions.push_back(p);
  }
  return nodes;
}

Scene generate_random_scene(const SceneGenConfig& cfg, std::uint64_t seed) {
  if (cfg.n_buildings < 0) fail("scene generation: n_buildings must be >= 0");
  if (!(cfg.side_min < cfg.side_max) || !(cfg.height_min < cfg.height_max) ||
      !(cfg.attenuation_min < cfg.attenuation_max)) {
    fail("scene generation: ranges must be non-degenerate");
  }
  if (cfg.side_max > cfg.width || cfg.side_max > cfg.depth) {
    fail("scene generation: building side may exceed the area extent");
  }
  Scene s;
  s.width = cfg.width;
  s.depth = cfg.depth;
  s.rng_seed = seed;
  Rng rng(splitmix64(seed));
  std::uniform_real_distribution<double> side(cfg.side_min, cfg.side_max);
  std::uniform_real_distribution<double> height(cfg.height_min, cfg.height_max);
  std::uniform_real_distribution<double> atten(cfg.attenuation_min, cfg.attenuation_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int n = 0; n < cfg.n_buildings; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_attempts_per_building; ++attempt) {
      double w = side(rng), d = side(rng), h = height(rng);
      double x0 = u01(rng) * (cfg.width - w);
      double y0 = u01(rng) * (cfg.depth - d);
      Building b{Vec3(x0, y0, 0.0), Vec3(x0 + w, y0 + d, h), atten(rng)};
      bool overlap = false;
      for (const auto& other : s.buildings) {
        if (footprints_overlap(b, other)) {
          overlap = true;
          break;
        }
      }
      if (!overlap) {
        s.buildings.push_back(b);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw PlacementFailure(
          "scene generation: could not place building " + std::to_string(n + 1) + " of " +
              std::to_string(cfg.n_buildings) + " within " +
              std::to_string(cfg.max_attempts_per_building) + " attempts",
          cfg.max_attempts_per_building);
    }
  }
  return s;
}

std::string to_text(const Scene& s) {
  std::ostringstream out;
  out << "scene v1\n";
  out << "extent " << fmt_double(s.width) << ' ' << fmt_double(s.depth) << '\n';
  out << "seed " << s.rng_seed << '\n';
  for (const auto& b : s.buildings) {
    out << "building";
    for (int k = 0; k < 3; ++k) out << ' ' << fmt_double(b.min_corner[k]);
    for (int k = 0; k < 3; ++k) out << ' ' << fmt_double(b.max_corner[k]);
    out << ' ' << fmt_double(b.attenuation_db_per_m) << '\n';
  }
  return out.str();
}

Scene parse_scene(std::istream& in) {
  Scene s;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (!header_seen) {
      std::string version;
      ls >> version;
      if (tag != "scene" || version != "v1") fail("scene file: expected 'scene v1' header");
      header_seen = true;
      continue;
    }
    if (tag == "extent") {
      if (!(ls >> s.width >> s.depth)) fail("scene file: malformed extent line");
    } else if (tag == "seed") {
      if (!(ls >> s.rng_seed)) fail("scene file: malformed seed line");
    } else if (tag == "building") {
      Building b;
      for (int k = 0; k < 3; ++k) ls >> b.min_corner[k];
      for (int k = 0; k < 3; ++k) ls >> b.max_corner[k];
      if (!(ls >> b.attenuation_db_per_m)) fail("scene file: malformed building line");
      s.buildings.push_back(b);
    } else {
      fail("scene file: unknown directive '" + tag + "'");
    }
  }
  if (!header_seen) fail("scene file: empty or missing header");
  validate(s);
  return s;
}

std::string to_text(const Trajectory& t) {
  std::ostringstream out;
  out << "trajectory v1\n";
  for (const auto& w : t.waypoints) {
    out << "waypoint " << fmt_double(w.x()) << ' ' << fmt_double(w.y()) << ' '
        << fmt_double(w.z()) << '\n';
  }
  return out.str();
}

Trajectory parse_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (!header_seen) {
      std::string version;
      ls >> version;
      if (tag != "trajectory" || version != "v1") {
        fail("trajectory file: expected 'trajectory v1' header");
      }
      header_seen = true;
      continue;
    }
    if (tag == "waypoint") {
      Vec3 w;
      if (!(ls >> w.x() >> w.y() >> w.z())) fail("trajectory file: malformed waypoint line");
      t.waypoints.push_back(w);
    } else if (tag == "circle") {
      Vec3 c;
      double radius = 0.0;
      int n = 0;
      if (!(ls >> c.x() >> c.y() >> c.z() >> radius >> n)) {
        fail("trajectory file: malformed circle line");
      }
      Trajectory circ = build_circular_trajectory(c, radius, n);
      t.waypoints.insert(t.waypoints.end(), circ.waypoints.begin(), circ.waypoints.end());
    } else {
      fail("trajectory file: unknown directive '" + tag + "'");
    }
  }
  if (!header_seen) fail("trajectory file: empty or missing header");
  validate(t);
  return t;
}

namespace {

void save_text(const std::string& text, const std::string& path, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(std::string(what) + ": cannot open '" + path + "'");
  out << text;
}

}  // namespace

void save_scene(const Scene& s, const std::string& path) { save_text(to_text(s), path, "save_scene"); }

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_scene: cannot open '" + path + "'");
  return parse_scene(in);
}

void save_trajectory(const Trajectory& t, const std::string& path) {
  save_text(to_text(t), path, "save_trajectory");
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_trajectory: cannot open '" + path + "'");
  return parse_trajectory(in);
}

std::uint64_t scene_hash(const Scene& s) {
  const std::string text = to_text(s);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace iccl
