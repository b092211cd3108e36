#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "physlab/numkit.hpp"

// Constrained gradient search for minimum-error-probability signal
// constellations under an average-power budget.
namespace physlab::constellation {

/// M signal points in d dimensions (row m = point m) with an average-power
/// budget p_av: (1/M) sum_m ||z_m||^2 <= p_av.
struct Constellation {
  Mat points;
  double p_av = 0.0;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  double average_power() const { return points.squaredNorm() / points.rows(); }
  double min_distance() const;

  /// Throws std::invalid_argument on shape, finiteness or power violations.
  void validate() const;
};

struct GsConfig {
  double n0 = 0.05;       // one-sided noise density / 2
  double step = 2e-4;     // gradient step size
  int max_steps = 1000;
  int restarts = 1;
  std::uint64_t seed = 0;
  double p_av = 0.0;      // <= 0 picks the 1/M default
};

struct PeValue {
  double value = 1.0;
  bool degenerate = false;  // coincident points
};

/// exp(-(1/(8 n0)) min_{i != j} ||z_i - z_j||^2); returns 1 with the
/// degenerate flag set when two points coincide.
PeValue asymptotic_pe(const Constellation& c, double n0);

/// Row m: -sum_{i != m} exp(-d^2/(8 n0)) (1/d^2 + 1/(4 n0)) unit(z_m - z_i),
/// the gradient of sum_{i<j} exp(-d_ij^2/(8 n0)) / d_ij. Throws on coincident
/// points.
Mat pe_gradient(const Constellation& c, double n0);

/// One constrained step: descend along pe_gradient, then rescale so the
/// average power equals p_av exactly.
Constellation gs_step(const Constellation& c, const GsConfig& cfg);

struct OptimizeResult {
  Constellation best;
  std::vector<double> min_distance_trace;  // winning restart, one entry per step
  int winning_restart = -1;
};

/// Best-of-restarts search; restart r runs from seed cfg.seed + r with points
/// initialized uniformly in the unit d-ball. Champion = highest minimum
/// distance, ties broken by lower asymptotic Pe, then restart index.
OptimizeResult optimize(int m_points, int dim, const GsConfig& cfg);

/// CSV with header "m,x1,...,xd", one row per point, 17 significant digits.
void write_csv(const Constellation& c, const std::filesystem::path& path);
Constellation read_csv(const std::filesystem::path& path, double p_av);

/// Fraction of nearest-neighbor angular gaps within `tol_deg` of 60 degrees;
/// close to 1 for a hexagonal lattice.
double hexangle_fraction(const Constellation& c, double tol_deg = 10.0);

}  // namespace physlab::constellation
