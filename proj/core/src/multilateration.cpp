#include "iccl/multilateration.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "iccl/errors.hpp"

namespace iccl {

namespace {

// Relative threshold deciding when the 2-column system has lost rank.
constexpr double kRankTol = 1e-10;

void check_inputs(std::span<const Vec2> anchors, std::span<const double> distances) {
  if (anchors.size() < 3) {
    throw std::invalid_argument("multilateration: at least 3 anchors are required");
  }
  if (anchors.size() != distances.size()) {
    throw std::invalid_argument("multilateration: anchor/distance count mismatch");
  }
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("multilateration: distances must be finite and non-negative");
    }
  }
}

}  // namespace

double range_residual_norm(const Vec2& p, std::span<const Vec2> anchors,
                           std::span<const double> distances) {
  double sum = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = (p - anchors[i]).norm() - distances[i];
    sum += r * r;
  }
  return std::sqrt(sum);
}

PositionEstimate linearized_solve(std::span<const Vec2> anchors,
                                  std::span<const double> distances) {
  check_inputs(anchors, distances);
  const int m = static_cast<int>(anchors.size());
  const Vec2& ref = anchors[static_cast<std::size_t>(m - 1)];
  const double ref_sq = ref.squaredNorm();
  const double ref_d_sq = distances[static_cast<std::size_t>(m - 1)] *
                          distances[static_cast<std::size_t>(m - 1)];
  Eigen::MatrixXd a(m - 1, 2);
  Eigen::VectorXd b(m - 1);
  for (int i = 0; i < m - 1; ++i) {
    a.row(i) = 2.0 * (ref - anchors[static_cast<std::size_t>(i)]).transpose();
    b[i] = ref_sq - anchors[static_cast<std::size_t>(i)].squaredNorm() - ref_d_sq +
           distances[static_cast<std::size_t>(i)] * distances[static_cast<std::size_t>(i)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(1);
  if (!(smin > kRankTol * smax) || smax == 0.0) {
    throw DegenerateGeometry("multilateration: anchors are collinear or coincident");
  }
  PositionEstimate est;
  est.position = svd.solve(b);
  est.condition = smax / smin;
  est.residual_norm = range_residual_norm(est.position, anchors, distances);
  return est;
}

PositionEstimate refine(const PositionEstimate& initial, std::span<const Vec2> anchors,
                        std::span<const double> distances, int max_iter, double tol) {
  check_inputs(anchors, distances);
  if (max_iter < 0) throw std::invalid_argument("refine: max_iter must be >= 0");
  const int m = static_cast<int>(anchors.size());
  PositionEstimate best = initial;
  best.residual_norm = range_residual_norm(best.position, anchors, distances);
  Vec2 p = best.position;
  Eigen::MatrixXd jac(m, 2);
  Eigen::VectorXd res(m);
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i < m; ++i) {
      const Vec2 diff = p - anchors[static_cast<std::size_t>(i)];
      const double r = diff.norm();
      if (r < 1e-12) {
        jac.row(i).setZero();
        res[i] = -distances[static_cast<std::size_t>(i)];
        continue;
      }
      jac.row(i) = diff.transpose() / r;
      res[i] = r - distances[static_cast<std::size_t>(i)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!(svd.singularValues()(1) > kRankTol * svd.singularValues()(0))) {
      best.degenerate = true;
      return best;
    }
    const Vec2 step = svd.solve(-res);
    p += step;
    const double rnorm = range_residual_norm(p, anchors, distances);
    if (rnorm < best.residual_norm) {
      best.position = p;
      best.residual_norm = rnorm;
      best.condition = svd.singularValues()(0) / svd.singularValues()(1);
    }
    if (step.norm() < tol) break;
  }
  return best;
}

std::vector<LocalizeOutcome> localize_all(std::span<const Vec2> anchors,
                                          const Eigen::MatrixXd& distances,
                                          const LocalizeOptions& opts) {
  if (static_cast<int>(anchors.size()) != distances.rows()) {
    throw std::invalid_argument("localize_all: distance matrix must have one row per anchor");
  }
  std::vector<LocalizeOutcome> out(static_cast<std::size_t>(distances.cols()));
  std::vector<double> d(anchors.size());
  for (int j = 0; j < distances.cols(); ++j) {
    for (int i = 0; i < distances.rows(); ++i) d[static_cast<std::size_t>(i)] = distances(i, j);
    LocalizeOutcome& slot = out[static_cast<std::size_t>(j)];
    try {
      PositionEstimate est = linearized_solve(anchors, d);
      if (opts.refine) est = refine(est, anchors, d, opts.max_iter, opts.tol);
      slot.estimate = est;
    } catch (const DegenerateGeometry&) {
      slot.failed = true;
    }
  }
  return out;
}

}  // namespace iccl
