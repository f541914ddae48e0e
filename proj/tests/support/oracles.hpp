#pragma once

// Independent reference implementations used to check the library. These are
// deliberately brute-force and share no code with the implementations under
// test.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "iccl/scene.hpp"

namespace iccl::testing {

// Midpoint-rule ray marching: samples the segment and accumulates the length
// of the pieces whose sample point lies strictly inside the box.
inline double ray_box_length_marching(const Vec3& p0, const Vec3& p1, const Building& b,
                                      std::int64_t steps) {
  const Vec3 d = p1 - p0;
  const double seg_len = d.norm();
  std::int64_t inside = 0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
    const double x = p0.x() + t * d.x();
    const double y = p0.y() + t * d.y();
    const double z = p0.z() + t * d.z();
    if (x > b.min_corner.x() && x < b.max_corner.x() && y > b.min_corner.y() &&
        y < b.max_corner.y() && z > b.min_corner.z() && z < b.max_corner.z()) {
      ++inside;
    }
  }
  return seg_len * static_cast<double>(inside) / static_cast<double>(steps);
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

// Critical value of the two-sample KS test; c(0.01) = 1.628.
inline double ks_critical(std::size_t n, std::size_t m, double c_alpha = 1.628) {
  return c_alpha * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

// Mann-Kendall S statistic: sum of sign(x[j] - x[i]) over j > i.
inline int mann_kendall_s(std::span<const double> x) {
  int s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[j] > x[i]) ++s;
      else if (x[j] < x[i]) --s;
    }
  }
  return s;
}

// Exact one-sided p-value P(S <= s_observed) under the permutation null, for
// short series (n <= 8).
inline double mann_kendall_p_decreasing(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<int> ranks(static_cast<std::size_t>(n));
  std::iota(ranks.begin(), ranks.end(), 0);
  const int s_obs = mann_kendall_s(x);
  std::int64_t le = 0, total = 0;
  std::vector<double> perm(static_cast<std::size_t>(n));
  do {
    for (int k = 0; k < n; ++k) perm[static_cast<std::size_t>(k)] = ranks[static_cast<std::size_t>(k)];
    if (mann_kendall_s(perm) <= s_obs) ++le;
    ++total;
  } while (std::next_permutation(ranks.begin(), ranks.end()));
  return static_cast<double>(le) / static_cast<double>(total);
}

}  // namespace iccl::testing
