#pragma once

#include <cmath>
#include <span>

namespace rho_bayes::detail {

// Neumaier-compensated sum; plain summation of 10^4 weights already drifts
// by ~1e-12, which is the normalization tolerance.
inline double accurate_sum(std::span<const double> v) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace rho_bayes::detail
