#include "iccl/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace iccl {

void validate(const ChannelModel& m) {
  if (!(m.pathloss_exponent > 0.0)) throw std::invalid_argument("channel model: pathloss exponent must be positive");
  if (m.noise_power < 0.0) throw std::invalid_argument("channel model: noise power must be >= 0");
  if (m.n_pilot_symbols < 1) throw std::invalid_argument("channel model: need at least one pilot symbol");
  if (!(m.pilot_energy() > 0.0)) throw std::invalid_argument("channel model: pilot energy must be positive");
}

double ray_box_interior_length(const Vec3& p0, const Vec3& p1, const Building& b) {
  // Slab clipping of the segment parameter t in [0,1] against the three axis
  // intervals. Parallel rays outside a slab never enter; on a face they carry
  // zero interior length because the exit/entry parameters coincide.
  const Vec3 d = p1 - p0;
  double t_enter = 0.0;
  double t_exit = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double lo = b.min_corner[ax];
    const double hi = b.max_corner[ax];
    if (d[ax] == 0.0) {
      if (p0[ax] <= lo || p0[ax] >= hi) return 0.0;
      continue;
    }
    double ta = (lo - p0[ax]) / d[ax];
    double tb = (hi - p0[ax]) / d[ax];
    if (ta > tb) std::swap(ta, tb);
    t_enter = std::max(t_enter, ta);
    t_exit = std::min(t_exit, tb);
    if (t_enter >= t_exit) return 0.0;
  }
  return (t_exit - t_enter) * d.norm();
}

double true_gain(const Scene& scene, const ChannelModel& model, const Vec3& node_pos,
                 const Vec3& waypoint) {
  const double d = (node_pos - waypoint).norm();
  if (d == 0.0) throw std::invalid_argument("true_gain: node coincides with waypoint");
  double loss_db = model.reference_gain_db - 10.0 * model.pathloss_exponent * std::log10(d);
  for (const auto& b : scene.buildings) {
    loss_db -= b.attenuation_db_per_m * ray_box_interior_length(node_pos, waypoint, b);
  }
  return std::pow(10.0, loss_db / 10.0);
}

CsiVector measure_csi(const Scene& scene, const ChannelModel& model, const Trajectory& traj,
                      const Vec3& node_pos, Rng& rng) {
  validate(model);
  CsiVector csi;
  csi.gains.resize(traj.size());
  const double pilot_energy = model.pilot_energy();
  if (model.noise_power == 0.0) {
    for (int n = 0; n < traj.size(); ++n) {
      csi.gains[n] = true_gain(scene, model, node_pos, traj.waypoints[n]);
    }
    return csi;
  }
  // z ~ CN(0, sigma^2/||x||^2): each quadrature component has half the variance.
  const double comp_std = std::sqrt(model.noise_power / pilot_energy / 2.0);
  std::normal_distribution<double> gauss(0.0, comp_std);
  for (int n = 0; n < traj.size(); ++n) {
    const double g = true_gain(scene, model, node_pos, traj.waypoints[n]);
    const double re = std::sqrt(g) + gauss(rng);
    const double im = gauss(rng);
    csi.gains[n] = re * re + im * im;
  }
  return csi;
}

std::complex<double> ls_channel_estimate(const Eigen::VectorXcd& pilot,
                                         const Eigen::VectorXcd& received) {
  if (pilot.size() != received.size()) {
    throw std::invalid_argument("ls_channel_estimate: length mismatch");
  }
  const double energy = pilot.squaredNorm();
  if (energy == 0.0) throw std::invalid_argument("ls_channel_estimate: pilot must be nonzero");
  return pilot.dot(received) / energy;  // Eigen's dot conjugates the left operand
}

}  // namespace iccl
