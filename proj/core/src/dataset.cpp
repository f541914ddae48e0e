#include "iccl/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iccl {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary dataset format assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
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

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr char kBinMagic[8] = {'I', 'C', 'C', 'L', 'C', 'S', 'I', '1'};

}  // namespace

CsiDataset build_dataset(const Scene& scene, const ChannelModel& model, const Trajectory& traj,
                         const NodeSet& nodes, std::uint64_t seed) {
  CsiDataset d;
  d.n_waypoints = traj.size();
  d.scene_id = scene_hash(scene);
  d.noise_power = model.noise_power;
  d.records.reserve(nodes.size());
  for (int i = 0; i < nodes.size(); ++i) {
    Rng rng = make_rng(seed, /*stream=*/0x6373695f6e6f6465ULL, i);
    const Vec2& p = nodes.positions[i];
    CsiVector csi = measure_csi(scene, model, traj, Vec3(p.x(), p.y(), 0.0), rng);
    d.records.push_back({p, std::move(csi.gains)});
  }
  return d;
}

void save_dataset_csv(const CsiDataset& d, std::ostream& out) {
  out << "# iccl-csi v1\n";
  out << "# n_waypoints," << d.n_waypoints << '\n';
  out << "# n_nodes," << d.size() << '\n';
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(d.scene_id));
  out << "# scene_id," << hex << '\n';
  out << "# noise_power," << fmt_double(d.noise_power) << '\n';
  for (const auto& r : d.records) {
    out << fmt_double(r.position.x()) << ',' << fmt_double(r.position.y());
    for (int n = 0; n < r.gains.size(); ++n) out << ',' << fmt_double(r.gains[n]);
    out << '\n';
  }
}

CsiDataset load_dataset_csv(std::istream& in) {
  CsiDataset d;
  std::string line;
  int n_nodes = -1;
  bool magic_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      size_t comma = body.find(',');
      std::string key = body.substr(0, comma);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      if (key == "iccl-csi v1") {
        magic_seen = true;
      } else if (comma != std::string::npos) {
        std::string value = body.substr(comma + 1);
        if (key == "n_waypoints") d.n_waypoints = std::stoi(value);
        else if (key == "n_nodes") n_nodes = std::stoi(value);
        else if (key == "scene_id") d.scene_id = std::stoull(value, nullptr, 16);
        else if (key == "noise_power") d.noise_power = std::stod(value);
      }
      continue;
    }
    if (!magic_seen) throw std::runtime_error("csi csv: missing '# iccl-csi v1' header");
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != 2 + d.n_waypoints) {
      throw std::runtime_error("csi csv: row has wrong column count");
    }
    CsiRecord r;
    r.position = Vec2(vals[0], vals[1]);
    r.gains = Eigen::Map<const Eigen::VectorXd>(vals.data() + 2, d.n_waypoints);
    d.records.push_back(std::move(r));
  }
  if (!magic_seen) throw std::runtime_error("csi csv: missing '# iccl-csi v1' header");
  if (n_nodes >= 0 && n_nodes != d.size()) {
    throw std::runtime_error("csi csv: n_nodes header disagrees with row count");
  }
  return d;
}

void save_dataset_bin(const CsiDataset& d, std::ostream& out) {
  out.write(kBinMagic, sizeof(kBinMagic));
  write_u32(out, static_cast<std::uint32_t>(d.n_waypoints));
  write_u32(out, static_cast<std::uint32_t>(d.size()));
  write_u64(out, d.scene_id);
  write_f64(out, d.noise_power);
  for (const auto& r : d.records) {
    write_f64(out, r.position.x());
    write_f64(out, r.position.y());
    out.write(reinterpret_cast<const char*>(r.gains.data()),
              static_cast<std::streamsize>(sizeof(double)) * r.gains.size());
  }
}

CsiDataset load_dataset_bin(std::istream& in) {
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kBinMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("csi bin: bad magic");
  }
  CsiDataset d;
  d.n_waypoints = static_cast<int>(read_u32(in));
  const int n_nodes = static_cast<int>(read_u32(in));
  d.scene_id = read_u64(in);
  d.noise_power = read_f64(in);
  d.records.resize(n_nodes);
  for (auto& r : d.records) {
    r.position.x() = read_f64(in);
    r.position.y() = read_f64(in);
    r.gains.resize(d.n_waypoints);
    in.read(reinterpret_cast<char*>(r.gains.data()),
            static_cast<std::streamsize>(sizeof(double)) * d.n_waypoints);
  }
  if (!in) throw std::runtime_error("csi bin: truncated file");
  return d;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_dataset(const CsiDataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  if (has_suffix(path, ".csv")) {
    save_dataset_csv(d, out);
  } else {
    save_dataset_bin(d, out);
  }
}

CsiDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  if (has_suffix(path, ".csv")) return load_dataset_csv(in);
  return load_dataset_bin(in);
}

double max_gain(const CsiDataset& d) {
  if (d.records.empty()) throw std::invalid_argument("max_gain: empty dataset");
  double g = 0.0;
  for (const auto& r : d.records) g = std::max(g, r.gains.maxCoeff());
  return g;
}

}  // namespace iccl
