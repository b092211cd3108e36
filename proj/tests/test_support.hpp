#pragma once

#include <cmath>
#include <functional>

#include "physlab/numkit.hpp"

// Shared independent oracles for the test suites. These deliberately avoid
// the library's own computational paths.
namespace test_support {

/// Closed-form E[relu(u) relu(v)] for (u,v) ~ N(0, [[kii, kij], [kij, kjj]]):
/// sqrt(kii kjj) / (2 pi) * (sin t + (pi - t) cos t) with cos t the
/// correlation (the arc-cosine kernel of order 1).
inline double relu_arc_cosine(double kii, double kij, double kjj) {
  if (kii <= 0.0 || kjj <= 0.0) return 0.0;
  double denom = std::sqrt(kii * kjj);
  double c = std::min(1.0, std::max(-1.0, kij / denom));
  double t = std::acos(c);
  return denom / (2.0 * M_PI) * (std::sin(t) + (M_PI - t) * c);
}

/// Closed-form E[relu'(u) relu'(v)] = P(u > 0, v > 0) = (pi - t) / (2 pi)
/// (the arc-cosine kernel of order 0).
inline double relu_deriv_arc_cosine(double kii, double kij, double kjj) {
  if (kii <= 0.0 || kjj <= 0.0) return 0.0;
  double denom = std::sqrt(kii * kjj);
  double c = std::min(1.0, std::max(-1.0, kij / denom));
  return (M_PI - std::acos(c)) / (2.0 * M_PI);
}

/// Central finite difference of a scalar function along one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x,
                                 double step = 1e-6) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// Gaussian tail Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace test_support
