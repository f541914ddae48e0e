#pragma once

#include <Eigen/Core>
#include <complex>

#include "iccl/rng.hpp"
#include "iccl/scene.hpp"

namespace iccl {

// Log-distance path loss plus per-building line-integral shadowing, and the
// measurement-noise parameters of the pilot broadcast.
struct ChannelModel {
  double reference_gain_db = -40.0;  // gain at 1 m
  double pathloss_exponent = 2.0;
  double noise_power = 0.0;      // sigma^2, linear watts
  double tx_power_dbm = 30.0;    // per-symbol transmit power
  int n_pilot_symbols = 16;

  // ||x_n||^2 = N_p * P_tx
  double pilot_energy() const {
    return n_pilot_symbols * std::pow(10.0, (tx_power_dbm - 30.0) / 10.0);
  }
};

void validate(const ChannelModel& m);

// Noisy power-gain estimates of one node, one entry per waypoint. Linear
// scale; representation choices (dB, standardization) live in the learners.
struct CsiVector {
  Eigen::VectorXd gains;
  int size() const { return static_cast<int>(gains.size()); }
};

// Length of segment p0->p1 inside the open interior of the box. Zero for
// disjoint segments and for segments lying on a face.
double ray_box_interior_length(const Vec3& p0, const Vec3& p1, const Building& b);

// True linear power gain between a node and a waypoint:
//   g = 10^((G_ref - 10*kappa*log10(d) - sum_b atten_b * len_b) / 10)
double true_gain(const Scene& scene, const ChannelModel& model, const Vec3& node_pos,
                 const Vec3& waypoint);

// One noisy CSI vector per the measurement model
//   g~ = |sqrt(g) + z|^2,  z ~ CN(0, sigma^2 / ||x||^2).
// The caller owns the random stream so parallel runs can seed per realization.
CsiVector measure_csi(const Scene& scene, const ChannelModel& model, const Trajectory& traj,
                      const Vec3& node_pos, Rng& rng);

// Least-squares estimate of a flat-fading coefficient: x^H y / (x^H x).
std::complex<double> ls_channel_estimate(const Eigen::VectorXcd& pilot,
                                         const Eigen::VectorXcd& received);

}  // namespace iccl
