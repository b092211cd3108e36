#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

// Dense numerical kernel shared by every module: matrix aliases, a seeded
// deterministic generator, symmetric/Hermitian factorizations and the 2-D
// Gaussian quadrature used by the kernel recursions.
namespace physlab {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Cplx = std::complex<double>;

/// Seeded generator with a fixed uniform->double mapping and Box-Muller
/// normals, so streams are bit-identical for equal seeds regardless of the
/// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1), 53 mantissa bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in {0, ..., n-1} via rejection-free scaling (n small).
  int uniform_int(int n) { return static_cast<int>(uniform01() * n) % n; }

  double normal();

  /// Circularly symmetric complex Gaussian with total variance `var`.
  Cplx cnormal(double var);

  Vec normal_vec(Eigen::Index n);
  Mat normal_mat(Eigen::Index rows, Eigen::Index cols);

  /// Independent stream addressed by an index (worker sharding etc.).
  Rng derive(std::uint64_t index) const;
  /// Independent stream addressed by a label, e.g. "restart/3".
  Rng derive(const std::string& tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic seed mixing used by Rng::derive and the experiment harness.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);
std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag);

struct SymEig {
  Vec values;   // descending
  Mat vectors;  // column i pairs with values[i], orthonormal
};

/// Eigendecomposition of a symmetric matrix. Throws std::invalid_argument if
/// `a` is not square or departs from symmetry by more than `tol` (relative to
/// the largest entry magnitude).
SymEig sym_eig(const Mat& a, double tol = 1e-12);

/// Solve a x = b for Hermitian positive definite `a` via Cholesky. Throws
/// std::invalid_argument on shape/symmetry violations and std::runtime_error
/// naming the failing pivot when `a` is not positive definite.
CMat herm_solve(const CMat& a, const CMat& b);

/// Nodes and weights of the order-n Gauss-Hermite rule (physicists'
/// convention: integrates f(t) exp(-t^2) dt exactly for deg <= 2n-1).
struct GaussHermiteRule {
  Vec nodes;
  Vec weights;
};
GaussHermiteRule gauss_hermite_rule(int order);

/// Nodes and weights of the order-n Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  Vec nodes;
  Vec weights;
};
GaussLegendreRule gauss_legendre_rule(int order);

/// Integral of f over [lo, hi] by composite Gauss-Legendre quadrature.
double gauss_legendre(const std::function<double(double)>& f, double lo, double hi,
                      int panels = 8, int order = 40);

/// E_{x ~ N(0,1)}[f(x)] by order-point Gauss-Hermite quadrature.
double gauss_hermite_1d(const std::function<double(double)>& f, int order);

/// E_{(u,v) ~ N(0, cov)}[f(u, v)] for a symmetric PSD 2x2 covariance.
/// Exact for polynomial f up to degree 2*order-1. Throws std::domain_error
/// when cov is not PSD, std::invalid_argument when order < 8.
double gauss_hermite_2d(const Mat& cov, const std::function<double(double, double)>& f,
                        int order);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// True when every entry is finite.
bool all_finite(const Mat& a);
bool all_finite(const CMat& a);

}  // namespace physlab
