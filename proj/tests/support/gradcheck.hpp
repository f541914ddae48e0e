#pragma once

// Central finite-difference verification of objective gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "iccl/nn.hpp"

namespace iccl::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

// Compares the analytic batch gradient against central differences with step
// h, coordinate by coordinate. Relative error uses a small absolute floor so
// exactly-zero gradients (dead paths) compare clean.
inline GradCheckResult finite_difference_check(nn::SupervisedObjective& obj,
                                               std::vector<double> params,
                                               std::span<const int> batch, double h = 1e-5) {
  std::vector<double> grad(params.size(), 0.0);
  obj.batch_loss_grad(params.data(), batch, grad.data());
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double lp = obj.batch_loss(params.data(), batch);
    params[k] = saved - h;
    const double lm = obj.batch_loss(params.data(), batch);
    params[k] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - grad[k]) / std::max(std::abs(fd) + std::abs(grad[k]), 1e-6);
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = k;
    }
  }
  return result;
}

}  // namespace iccl::testing
