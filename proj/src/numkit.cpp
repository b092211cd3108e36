#include "physlab/numkit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace physlab {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : tag) {
    h ^= c;
    h *= kFnvPrime;
  }
  return mix_seed(seed, h);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] keeps the log finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Cplx Rng::cnormal(double var) {
  double s = std::sqrt(var / 2.0);
  double re = normal();
  double im = normal();
  return Cplx(s * re, s * im);
}

Vec Rng::normal_vec(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

Mat Rng::normal_mat(Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

Rng Rng::derive(std::uint64_t index) const { return Rng(mix_seed(seed_, index)); }

Rng Rng::derive(const std::string& tag) const { return Rng(mix_seed(seed_, tag)); }

SymEig sym_eig(const Mat& a, double tol) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("sym_eig: matrix is not square (" + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + ")");
  if (a.size() == 0) throw std::invalid_argument("sym_eig: empty matrix");
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    std::ostringstream os;
    os << "sym_eig: matrix asymmetric beyond tolerance (max |a_ij - a_ji| = " << asym
       << ", allowed " << tol * scale << ")";
    throw std::invalid_argument(os.str());
  }
  Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig: eigensolver failed");
  Eigen::Index n = a.rows();
  SymEig out;
  out.values = Vec(n);
  out.vectors = Mat(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

CMat herm_solve(const CMat& a, const CMat& b) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("herm_solve: matrix is not square");
  if (a.rows() != b.rows())
    throw std::invalid_argument("herm_solve: dimension mismatch between a and b");
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  double asym = (a - a.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    std::ostringstream os;
    os << "herm_solve: matrix departs from conjugate symmetry by " << asym;
    throw std::invalid_argument(os.str());
  }
  CMat h = 0.5 * (a + a.adjoint());
  Eigen::LLT<CMat> llt(h);
  if (llt.info() != Eigen::Success) {
    // Re-run a plain Cholesky to report which pivot failed.
    Eigen::Index n = h.rows();
    CMat l = CMat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Cplx sum = h(j, j);
      for (Eigen::Index k = 0; k < j; ++k) sum -= l(j, k) * std::conj(l(j, k));
      double pivot = sum.real();
      if (pivot <= 0.0) {
        std::ostringstream os;
        os << "herm_solve: matrix not positive definite, pivot " << j << " = " << pivot;
        throw std::runtime_error(os.str());
      }
      l(j, j) = std::sqrt(pivot);
      for (Eigen::Index i = j + 1; i < n; ++i) {
        Cplx s = h(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
        l(i, j) = s / l(j, j).real();
      }
    }
    throw std::runtime_error("herm_solve: Cholesky failed");
  }
  return llt.solve(b);
}

GaussHermiteRule gauss_hermite_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite_rule: order must be positive");
  // Golub-Welsch on the Jacobi matrix of the Hermite recurrence.
  Mat jacobi = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    double beta = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  GaussHermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = Vec(order);
  double mu0 = std::sqrt(M_PI);
  for (int i = 0; i < order; ++i) {
    double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

GaussLegendreRule gauss_legendre_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre_rule: order must be positive");
  Mat jacobi = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  GaussLegendreRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights = Vec(order);
  for (int i = 0; i < order; ++i) {
    double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = 2.0 * v0 * v0;
  }
  return rule;
}

double gauss_legendre(const std::function<double(double)>& f, double lo, double hi, int panels,
                      int order) {
  GaussLegendreRule rule = gauss_legendre_rule(order);
  double total = 0.0;
  double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    double a = lo + p * width;
    double mid = a + 0.5 * width;
    for (int i = 0; i < order; ++i)
      total += 0.5 * width * rule.weights[i] * f(mid + 0.5 * width * rule.nodes[i]);
  }
  return total;
}

double gauss_hermite_1d(const std::function<double(double)>& f, int order) {
  GaussHermiteRule rule = gauss_hermite_rule(order);
  double sum = 0.0;
  const double sqrt2 = std::sqrt(2.0);
  for (int i = 0; i < order; ++i) sum += rule.weights[i] * f(sqrt2 * rule.nodes[i]);
  return sum / std::sqrt(M_PI);
}

double gauss_hermite_2d(const Mat& cov, const std::function<double(double, double)>& f,
                        int order) {
  if (cov.rows() != 2 || cov.cols() != 2)
    throw std::invalid_argument("gauss_hermite_2d: covariance must be 2x2");
  if (order < 8) throw std::invalid_argument("gauss_hermite_2d: order must be >= 8");
  double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * scale)
    throw std::domain_error("gauss_hermite_2d: covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
  Vec lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-12 * scale)
    throw std::domain_error("gauss_hermite_2d: covariance not positive semi-definite");
  Mat l = es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  GaussHermiteRule rule = gauss_hermite_rule(order);
  const double sqrt2 = std::sqrt(2.0);
  double sum = 0.0;
  for (int i = 0; i < order; ++i) {
    double a = sqrt2 * rule.nodes[i];
    for (int j = 0; j < order; ++j) {
      double b = sqrt2 * rule.nodes[j];
      double u = l(0, 0) * a + l(0, 1) * b;
      double v = l(1, 0) * a + l(1, 1) * b;
      sum += rule.weights[i] * rule.weights[j] * f(u, v);
    }
  }
  return sum / M_PI;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

bool all_finite(const Mat& a) { return a.allFinite(); }
bool all_finite(const CMat& a) {
  return a.real().allFinite() && a.imag().allFinite();
}

}  // namespace physlab
