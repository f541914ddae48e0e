#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "iccl/scene.hpp"

namespace iccl {

struct PositionEstimate {
  Vec2 position = Vec2::Zero();
  double residual_norm = 0.0;  // norm of the nonlinear range residuals at `position`
  double condition = 0.0;      // condition number of the linearized system
  bool degenerate = false;     // refinement hit a rank-deficient Jacobian
};

// Norm of (||p - anchor_i|| - d_i) over all anchors.
double range_residual_norm(const Vec2& p, std::span<const Vec2> anchors,
                           std::span<const double> distances);

// Linearized multilateration: each range equation is squared and the last
// anchor's equation subtracted, eliminating the quadratic term. The resulting
// (M_a - 1) x 2 system is solved by QR. Throws DegenerateGeometry for
// collinear anchors, std::invalid_argument for fewer than 3.
PositionEstimate linearized_solve(std::span<const Vec2> anchors,
                                  std::span<const double> distances);

// Gauss-Newton iteration on the nonlinear range residuals. Never returns a
// larger residual than `initial`; max_iter = 0 returns the input unchanged.
// A rank-deficient Jacobian stops iteration and sets the degenerate flag.
PositionEstimate refine(const PositionEstimate& initial, std::span<const Vec2> anchors,
                        std::span<const double> distances, int max_iter = 50,
                        double tol = 1e-6);

struct LocalizeOptions {
  bool refine = true;
  int max_iter = 50;
  double tol = 1e-6;
};

struct LocalizeOutcome {
  PositionEstimate estimate;
  bool failed = false;  // degenerate linear system; estimate is meaningless
};

// Independent solve (+ optional refinement) per column of `distances`
// (anchors x unknowns). Per-unknown failures are recorded, not thrown.
std::vector<LocalizeOutcome> localize_all(std::span<const Vec2> anchors,
                                          const Eigen::MatrixXd& distances,
                                          const LocalizeOptions& opts = {});

}  // namespace iccl
