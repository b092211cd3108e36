#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "physlab/constellation.hpp"
#include "test_support.hpp"

using namespace physlab;
using namespace physlab::constellation;

namespace {

Constellation antipodal_pair() {
  Mat points(2, 1);
  points << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
  return {points, 0.5};
}

// Potential whose exact gradient is the implemented per-point formula:
// sum_{i<j} exp(-d_ij^2 / (8 n0)) / d_ij.
double pe_potential(const Mat& points, double n0) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      double d = (points.row(i) - points.row(j)).norm();
      total += std::exp(-d * d / (8.0 * n0)) / d;
    }
  return total;
}

}  // namespace

TEST_CASE("asymptotic_pe direct substitution") {
  PeValue pe = asymptotic_pe(antipodal_pair(), 0.25);
  CHECK(!pe.degenerate);
  CHECK(pe.value == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("asymptotic_pe flags duplicated points") {
  Mat points(3, 2);
  points << 0.1, 0.2, 0.1, 0.2, -0.2, -0.1;
  Constellation c{points, 1.0};
  PeValue pe = asymptotic_pe(c, 0.1);
  CHECK(pe.degenerate);
  CHECK(pe.value == 1.0);
}

TEST_CASE("pe_gradient antipodal symmetry") {
  Mat g = pe_gradient(antipodal_pair(), 0.1);
  CHECK(g(0, 0) == doctest::Approx(-g(1, 0)).epsilon(1e-14));
  CHECK(g(0, 0) != 0.0);
}

TEST_CASE("pe_gradient equilateral triangle is radial with equal magnitudes") {
  const double r = 0.5;
  Mat points(3, 2);
  for (int k = 0; k < 3; ++k) {
    double a = 2.0 * M_PI * k / 3.0;
    points(k, 0) = r * std::cos(a);
    points(k, 1) = r * std::sin(a);
  }
  Constellation c{points, 0.25 + 1e-12};
  Mat g = pe_gradient(c, 0.05);
  double mag0 = g.row(0).norm();
  for (int k = 0; k < 3; ++k) {
    CHECK(g.row(k).norm() == doctest::Approx(mag0).epsilon(1e-12));
    // Radial: parallel to the position vector. The formula's sign makes the
    // gradient point toward the centroid; the descent step -eta g therefore
    // pushes points apart.
    Eigen::RowVector2d dir = points.row(k) / points.row(k).norm();
    double along = g.row(k).dot(dir);
    CHECK(std::abs(g.row(k)(0) * dir(1) - g.row(k)(1) * dir(0)) < 1e-14);  // no tangent part
    CHECK(along < 0.0);
  }
}

TEST_CASE("pe_gradient matches finite differences of its potential") {
  Rng rng(17);
  const double n0 = 0.07;
  Mat points = 0.4 * rng.normal_mat(5, 2);
  Constellation c{points, points.squaredNorm() / 5 + 1e-9};
  Mat grad = pe_gradient(c, n0);
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      double fd = test_support::central_difference(
          [&](double x) {
            Mat p = points;
            p(i, j) = x;
            return pe_potential(p, n0);
          },
          points(i, j));
      CHECK(grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("gs_step with zero step is the identity at exact power") {
  Constellation c = antipodal_pair();
  GsConfig cfg;
  cfg.step = 0.0;
  cfg.n0 = 0.1;
  Constellation next = gs_step(c, cfg);
  CHECK((next.points - c.points).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("pe_gradient of the center of a symmetric ring vanishes") {
  Mat points(5, 2);
  points.row(0).setZero();
  for (int k = 0; k < 4; ++k) {
    double a = 2.0 * M_PI * k / 4.0;
    points(k + 1, 0) = 0.5 * std::cos(a);
    points(k + 1, 1) = 0.5 * std::sin(a);
  }
  Constellation c{points, points.squaredNorm() / 5};
  Mat g = pe_gradient(c, 0.05);
  CHECK(g.row(0).norm() < 1e-15);
}

TEST_CASE("gs_step restores the power constraint with equality") {
  Rng rng(3);
  Mat points = 0.3 * rng.normal_mat(6, 2);
  Constellation c{points, 1.0 / 6};
  double scale = std::sqrt((1.0 / 6) / c.average_power());
  c.points *= scale;
  GsConfig cfg;
  cfg.n0 = 0.05;
  cfg.step = 1e-3;
  Constellation next = gs_step(c, cfg);
  CHECK(next.average_power() == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("gs_step near an optimum does not reduce the minimum distance") {
  GsConfig cfg;
  cfg.n0 = 0.01;
  cfg.step = 2e-4;
  cfg.max_steps = 800;
  cfg.restarts = 3;
  cfg.seed = 5;
  OptimizeResult opt = optimize(4, 2, cfg);
  Rng rng(8);
  Constellation perturbed = opt.best;
  perturbed.points += 1e-3 * rng.normal_mat(4, 2);
  perturbed.points *= std::sqrt(perturbed.p_av / perturbed.average_power());
  double before = perturbed.min_distance();
  Constellation stepped = gs_step(perturbed, cfg);
  CHECK(stepped.min_distance() >= before - 1e-9);
}

TEST_CASE("optimize M=2 d=1 finds the antipodal pair") {
  GsConfig cfg;
  cfg.n0 = 0.05;
  cfg.step = 2e-3;
  cfg.max_steps = 3000;
  cfg.restarts = 3;
  cfg.seed = 1;
  OptimizeResult opt = optimize(2, 1, cfg);
  double target = 1.0 / std::sqrt(2.0);
  double a = opt.best.points(0, 0), b = opt.best.points(1, 0);
  CHECK(std::abs(std::abs(a) - target) < 1e-3);
  CHECK(std::abs(std::abs(b) - target) < 1e-3);
  CHECK(a * b < 0.0);
  CHECK(opt.min_distance_trace.size() == 3000);
}

TEST_CASE("optimize M=8 best-of-restarts is near the many-restart champion") {
  GsConfig cfg;
  cfg.n0 = 0.01;
  cfg.step = 2e-4;
  cfg.max_steps = 600;
  cfg.seed = 2;
  cfg.restarts = 6;
  double small = optimize(8, 2, cfg).best.min_distance();
  cfg.restarts = 24;
  double champion = optimize(8, 2, cfg).best.min_distance();
  CHECK(small >= 0.97 * champion);
}

TEST_CASE("optimize M=16 tends to a triangular lattice") {
  GsConfig cfg;
  cfg.n0 = 0.01;
  cfg.step = 2e-4;
  cfg.max_steps = 1500;
  cfg.restarts = 6;
  cfg.seed = 4;
  OptimizeResult opt = optimize(16, 2, cfg);
  CHECK(hexangle_fraction(opt.best) >= 0.6);
}

TEST_CASE("rotation invariance of pe and minimum distance") {
  GsConfig cfg;
  cfg.seed = 9;
  cfg.restarts = 1;
  cfg.max_steps = 50;
  cfg.n0 = 0.05;
  OptimizeResult opt = optimize(6, 2, cfg);
  double angle = 0.7;
  Mat rot(2, 2);
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Constellation rotated{opt.best.points * rot.transpose(), opt.best.p_av};
  CHECK(std::abs(rotated.min_distance() - opt.best.min_distance()) < 1e-12);
  CHECK(std::abs(asymptotic_pe(rotated, 0.05).value - asymptotic_pe(opt.best, 0.05).value) <
        1e-12);
}

TEST_CASE("asymptotic_pe is monotone in the minimum distance") {
  Constellation c = antipodal_pair();
  double prev = 1.0;
  for (double scale : {0.5, 0.8, 1.0}) {
    Constellation scaled{c.points * scale, c.p_av};
    double pe = asymptotic_pe(scaled, 0.1).value;
    CHECK(pe < prev);
    prev = pe;
  }
}

TEST_CASE("constellation CSV round trip is bit exact") {
  GsConfig cfg;
  cfg.seed = 12;
  cfg.max_steps = 20;
  OptimizeResult opt = optimize(5, 3, cfg);
  auto path = std::filesystem::temp_directory_path() / "physlab_test_constellation.csv";
  write_csv(opt.best, path);
  Constellation back = read_csv(path, opt.best.p_av);
  CHECK((back.points - opt.best.points).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("validation rejects malformed constellations") {
  Mat one(1, 2);
  one.setZero();
  CHECK_THROWS_AS((Constellation{one, 1.0}.validate()), std::invalid_argument);
  Mat two(2, 2);
  two << 1.0, 0.0, 0.0, 1.0;
  CHECK_THROWS_AS((Constellation{two, 0.1}.validate()), std::invalid_argument);
}
