#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "physlab/numkit.hpp"
#include "test_support.hpp"

using namespace physlab;

TEST_CASE("sym_eig identity") {
  SymEig eig = sym_eig(Mat::Identity(3, 3));
  for (int i = 0; i < 3; ++i) CHECK(eig.values[i] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig diagonal sorts descending") {
  Mat a = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
  SymEig eig = sym_eig(a);
  CHECK(eig.values[0] == doctest::Approx(3.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs a random symmetric matrix") {
  Rng rng(11);
  Mat r = rng.normal_mat(8, 8);
  Mat a = 0.5 * (r + r.transpose());
  SymEig eig = sym_eig(a);
  Mat rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
  CHECK((rebuilt - a).norm() < 1e-9);
  // Orthonormal vectors and eigenvalue equations.
  CHECK((eig.vectors.transpose() * eig.vectors - Mat::Identity(8, 8)).cwiseAbs().maxCoeff() <
        1e-11);
  for (int i = 0; i < 8; ++i)
    CHECK((a * eig.vectors.col(i) - eig.values[i] * eig.vectors.col(i)).cwiseAbs().maxCoeff() <
          1e-11);
}

TEST_CASE("sym_eig trace and PSD invariants") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Mat r = rng.normal_mat(6, 6);
    Mat a = 0.5 * (r + r.transpose());
    SymEig eig = sym_eig(a);
    CHECK(std::abs(eig.values.sum() - a.trace()) <= 1e-9 * std::max(1.0, a.norm()));
    Mat psd = r * r.transpose();
    SymEig peig = sym_eig(psd);
    CHECK(peig.values.minCoeff() >= -1e-10 * std::max(1.0, psd.norm()));
  }
}

TEST_CASE("sym_eig rejects bad inputs") {
  CHECK_THROWS_AS(sym_eig(Mat::Zero(2, 3)), std::invalid_argument);
  Mat asym(2, 2);
  asym << 0.0, 1.0, -1.0, 0.0;
  CHECK_THROWS_AS(sym_eig(asym), std::invalid_argument);
}

TEST_CASE("herm_solve identity and scalar systems") {
  CMat b = CMat::Random(4, 2);
  CMat x = herm_solve(CMat::Identity(4, 4), b);
  CHECK((x - b).norm() < 1e-14);
  CMat ones = CMat::Ones(3, 1);
  CMat y = herm_solve(2.0 * CMat::Identity(3, 3), ones);
  CHECK((y - 0.5 * ones).norm() < 1e-14);
}

TEST_CASE("herm_solve random HPD residual") {
  Rng rng(7);
  const int n = 16;
  CMat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = Cplx(rng.normal(), rng.normal());
  CMat a = g * g.adjoint() + 0.5 * CMat::Identity(n, n);
  CMat b(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = Cplx(rng.normal(), rng.normal());
  CMat x = herm_solve(a, b);
  CHECK((a * x - b).norm() / b.norm() < 1e-10);
}

TEST_CASE("herm_solve names the failing pivot") {
  CMat a = CMat::Identity(3, 3);
  a(2, 2) = -1.0;
  try {
    herm_solve(a, CMat::Ones(3, 1));
    FAIL("expected a singularity error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("pivot 2") != std::string::npos);
  }
  CMat skew(2, 2);
  skew << Cplx(1, 0), Cplx(0, 1), Cplx(0, 1), Cplx(1, 0);
  CHECK_THROWS_AS(herm_solve(skew, CMat::Ones(2, 1)), std::invalid_argument);
}

TEST_CASE("gauss_hermite_2d independence and perfect correlation") {
  auto product = [](double u, double v) { return u * v; };
  CHECK(gauss_hermite_2d(Mat::Identity(2, 2), product, 16) == doctest::Approx(0.0).epsilon(1e-12));
  Mat cov(2, 2);
  cov << 1.0, 1.0, 1.0, 1.0;
  CHECK(gauss_hermite_2d(cov, product, 16) == doctest::Approx(1.0));
}

TEST_CASE("gauss_hermite_2d matches the relu closed form at quadrature accuracy") {
  // Kinked integrand: plain tensor quadrature converges slowly, so this
  // cross-check runs at a loose tolerance; the smooth reduction used by the
  // kernel recursion is tested in the ntk suite at 1e-10.
  for (double rho : {0.0, 0.3, 0.7}) {
    Mat cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    double got = gauss_hermite_2d(
        cov, [](double u, double v) { return std::max(u, 0.0) * std::max(v, 0.0); }, 64);
    CHECK(std::abs(got - test_support::relu_arc_cosine(1.0, rho, 1.0)) < 5e-3);
  }
}

TEST_CASE("gauss_hermite_2d is exact for polynomials") {
  Rng rng(3);
  Mat cov(2, 2);
  cov << 2.0, 0.7, 0.7, 1.5;
  // E[u^a v^b] under N(0, cov) via Isserlis from the moment recurrence:
  // compare two quadrature orders instead, both exact for deg <= 15.
  auto poly = [&](double u, double v) {
    return 1.5 * u * u * v - 0.25 * u * v * v * v + 2.0 * v * v - u + 0.5;
  };
  double lo = gauss_hermite_2d(cov, poly, 8);
  double hi = gauss_hermite_2d(cov, poly, 40);
  CHECK(lo == doctest::Approx(hi).epsilon(1e-12));
}

TEST_CASE("gauss_hermite_2d rejects bad inputs") {
  auto f = [](double, double) { return 1.0; };
  Mat neg(2, 2);
  neg << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS_AS(gauss_hermite_2d(neg, f, 16), std::domain_error);
  CHECK_THROWS_AS(gauss_hermite_2d(Mat::Identity(2, 2), f, 4), std::invalid_argument);
}

TEST_CASE("gauss_hermite_1d hits known moments") {
  CHECK(gauss_hermite_1d([](double x) { return x * x; }, 32) == doctest::Approx(1.0));
  CHECK(gauss_hermite_1d([](double x) { return x * x * x * x; }, 32) == doctest::Approx(3.0));
}

TEST_CASE("rng reproducibility: equal seeds give bit-identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform01() == b.uniform01());
    CHECK(a.normal() == b.normal());
  }
  Rng c = Rng(42).derive("stream");
  Rng d = Rng(42).derive("stream");
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
  CHECK(Rng(42).derive("a").seed() != Rng(42).derive("b").seed());
}

TEST_CASE("rng standard normal moments over 1e6 draws") {
  Rng rng(2024);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng complex normal variance") {
  Rng rng(9);
  const int n = 200000;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) sum_sq += std::norm(rng.cnormal(2.0));
  CHECK(sum_sq / n == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("gauss_legendre integrates smooth functions to machine precision") {
  double got = gauss_legendre([](double x) { return std::exp(-x) * std::sin(3.0 * x); }, 0.0,
                              5.0);
  double expect = (3.0 - std::exp(-5.0) * (3.0 * std::cos(15.0) + std::sin(15.0))) / 10.0;
  CHECK(got == doctest::Approx(expect).epsilon(1e-13));
}
