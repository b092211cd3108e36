#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "physlab/neural.hpp"
#include "test_support.hpp"

using namespace physlab;
using namespace physlab::neural;

namespace {

std::vector<Activation> acts(std::initializer_list<Act> tags) {
  std::vector<Activation> out;
  for (Act t : tags) out.push_back(Activation::make(t));
  return out;
}

double loss_of(const Network& net, const Loss& loss, const Mat& x, const Mat& target) {
  return loss_value(loss, forward(net, x).activations.back(), target);
}

// Central-difference check of dL/dW against the analytic backward pass on a
// subset of entries.
void gradient_check(const Network& net, const Loss& loss, const Mat& x, const Mat& target,
                    double tol = 1e-5) {
  Forward fwd = forward(net, x);
  Backward back = backward(net, fwd, loss, target);
  Rng pick(99);
  for (int h = 0; h < net.depth(); ++h) {
    for (int probe = 0; probe < 12; ++probe) {
      Eigen::Index i = pick.uniform_int(static_cast<int>(net.weights[h].rows()));
      Eigen::Index j = pick.uniform_int(static_cast<int>(net.weights[h].cols()));
      Network bumped = net;
      double w0 = net.weights[h](i, j);
      double step = 1e-6;
      bumped.weights[h](i, j) = w0 + step;
      double up = loss_of(bumped, loss, x, target);
      bumped.weights[h](i, j) = w0 - step;
      double down = loss_of(bumped, loss, x, target);
      double fd = (up - down) / (2.0 * step);
      double analytic = back.weight_grads[h](i, j);
      double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      CHECK(std::abs(fd - analytic) / scale < tol);
    }
  }
}

}  // namespace

TEST_CASE("init draws unit-variance weights") {
  double total_var = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Network net = init({8, 8, 8}, acts({Act::softplus, Act::softplus}), rng);
    double sq = 0.0;
    int count = 0;
    for (const Mat& w : net.weights) {
      sq += w.squaredNorm();
      count += static_cast<int>(w.size());
    }
    total_var += sq / count;
  }
  CHECK(total_var / 10 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("init is deterministic in the seed") {
  Rng a(7), b(7);
  Network na = init({4, 5, 3}, acts({Act::relu, Act::linear}), a);
  Network nb = init({4, 5, 3}, acts({Act::relu, Act::linear}), b);
  for (int h = 0; h < na.depth(); ++h)
    CHECK((na.weights[h] - nb.weights[h]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("relu scaling constant is exactly 2 and matches Monte Carlo") {
  CHECK(Activation::make(Act::relu).c_sigma == 2.0);
  Rng rng(123);
  double sum = 0.0;
  const int n = 10000000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    double r = x > 0.0 ? x : 0.0;
    sum += r * r;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.004));
}

TEST_CASE("softplus scaling constant inverts the second moment") {
  double c = Activation::make(Act::softplus).c_sigma;
  double second = gauss_hermite_1d(
      [](double x) {
        double s = std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
        return s * s;
      },
      90);
  CHECK(c == doctest::Approx(1.0 / second).epsilon(1e-10));
}

TEST_CASE("forward linear chain applies the sqrt(c/m) scaling") {
  Rng rng(1);
  Network net = init({3, 3, 3}, acts({Act::linear, Act::linear}), rng);
  net.weights[0] = Mat::Identity(3, 3);
  net.weights[1] = Mat::Identity(3, 3);
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  std::vector<Vec> layers = forward_vec(net, x);
  CHECK((layers.back() - x / 3.0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax output is a probability vector") {
  Rng rng(2);
  Network net = init({4, 6, 5}, acts({Act::relu, Act::softmax}), rng);
  Mat x = 50.0 * rng.normal_mat(4, 7);
  Mat out = forward(net, x).activations.back();
  for (int j = 0; j < out.cols(); ++j) {
    CHECK(out.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.col(j).minCoeff() >= 0.0);
  }
}

TEST_CASE("softplus at zero is log 2 before scaling") {
  CHECK(act_value(Act::softplus, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("softplus stays finite for large inputs") {
  CHECK(std::isfinite(act_value(Act::softplus, 700.0)));
  CHECK(std::isfinite(act_value(Act::softplus, -700.0)));
  CHECK(act_value(Act::softplus, 700.0) == doctest::Approx(700.0));
}

TEST_CASE("backward at an exact fit returns zero gradients") {
  Rng rng(4);
  Network net = init({3, 5, 4}, acts({Act::softplus, Act::linear}), rng);
  Mat x = rng.normal_mat(3, 2);
  Forward fwd = forward(net, x);
  Mat target = fwd.activations.back();
  Backward back = backward(net, fwd, {LossTag::square}, target);
  for (const Mat& g : back.weight_grads) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient check across activation and loss combinations") {
  Rng rng(6);
  Mat x = rng.normal_mat(4, 3);

  SUBCASE("softplus + square") {
    Network net = init({4, 8, 8, 4}, acts({Act::softplus, Act::softplus, Act::linear}), rng);
    gradient_check(net, {LossTag::square}, x, rng.normal_mat(4, 3));
  }
  SUBCASE("relu + square") {
    Network net = init({4, 8, 8, 4}, acts({Act::relu, Act::relu, Act::linear}), rng);
    gradient_check(net, {LossTag::square}, x, rng.normal_mat(4, 3));
  }
  SUBCASE("softplus + softmax + cross entropy") {
    Network net = init({4, 8, 8, 4}, acts({Act::softplus, Act::softplus, Act::softmax}), rng);
    Mat target = Mat::Zero(4, 3);
    for (int j = 0; j < 3; ++j) target(j % 4, j) = 1.0;
    gradient_check(net, {LossTag::cross_entropy}, x, target);
  }
  SUBCASE("softmax + square") {
    Network net = init({4, 8, 4}, acts({Act::softplus, Act::softmax}), rng);
    Mat target = Mat::Zero(4, 3);
    for (int j = 0; j < 3; ++j) target(j % 4, j) = 1.0;
    gradient_check(net, {LossTag::square}, x, target);
  }
}

TEST_CASE("cross entropy with softmax yields the canonical output delta") {
  Rng rng(8);
  Network net = init({3, 4, 3}, acts({Act::relu, Act::softmax}), rng);
  Vec x(3);
  x << 0.3, -1.0, 0.7;
  Forward fwd = forward(net, x);
  Mat target = Mat::Zero(3, 1);
  target(1, 0) = 1.0;
  Backward back = backward(net, fwd, {LossTag::cross_entropy}, target);
  Mat delta = fwd.activations.back() - target;  // prediction minus one-hot
  Mat expected = delta * fwd.activations[1].transpose();
  CHECK((back.weight_grads[1] - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sgd_step with zero rate is the identity") {
  Rng rng(9);
  Network net = init({3, 3}, acts({Act::linear}), rng);
  Network before = net;
  Forward fwd = forward(net, rng.normal_mat(3, 2));
  Backward back = backward(net, fwd, {LossTag::square}, rng.normal_mat(3, 2));
  sgd_step(net, back.weight_grads, 0.0);
  CHECK((net.weights[0] - before.weights[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one step on a scalar quadratic matches the hand computation") {
  Network net;
  net.widths = {1, 1};
  net.weights = {Mat::Constant(1, 1, 0.8)};
  net.activations = acts({Act::linear});
  Mat x = Mat::Constant(1, 1, 1.0);
  Mat target = Mat::Zero(1, 1);
  Forward fwd = forward(net, x);
  CHECK(fwd.activations.back()(0, 0) == doctest::Approx(0.8));
  Backward back = backward(net, fwd, {LossTag::square}, target);
  double eta = 0.05;
  sgd_step(net, back.weight_grads, eta);
  // Loss w^2 gives the update w - eta * 2w.
  CHECK(net.weights[0](0, 0) == doctest::Approx(0.8 - eta * 2.0 * 0.8).epsilon(1e-14));
}

TEST_CASE("a sufficiently small step decreases a smooth loss") {
  Rng rng(10);
  Network net = init({4, 8, 4}, acts({Act::softplus, Act::linear}), rng);
  Mat x = rng.normal_mat(4, 5);
  Mat target = rng.normal_mat(4, 5);
  Loss loss{LossTag::square};
  double before = loss_of(net, loss, x, target);
  Forward fwd = forward(net, x);
  Backward back = backward(net, fwd, loss, target);
  sgd_step(net, back.weight_grads, 1e-4);
  CHECK(loss_of(net, loss, x, target) < before);
}

TEST_CASE("frobenius_norms") {
  Network net;
  net.widths = {3, 3, 3};
  net.weights = {Mat::Identity(3, 3), Mat::Zero(3, 3)};
  net.activations = acts({Act::linear, Act::linear});
  std::vector<double> norms = frobenius_norms(net);
  CHECK(norms[0] == doctest::Approx(std::sqrt(3.0)));
  CHECK(norms[1] == 0.0);

  Rng rng(11);
  Mat w = rng.normal_mat(4, 5);
  net.widths = {5, 4};
  net.weights = {w};
  net.activations = acts({Act::linear});
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) sum_sq += w(i, j) * w(i, j);
  CHECK(frobenius_norms(net)[0] == doctest::Approx(std::sqrt(sum_sq)).epsilon(1e-14));
}

TEST_CASE("c_sigma keeps the first-layer energy near one at width 512") {
  const int m = 512;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    Network net = init({m, m}, acts({Act::softplus}), rng);
    Vec x = rng.normal_vec(m);
    x.normalize();
    std::vector<Vec> layers = forward_vec(net, x);
    double energy = layers[1].squaredNorm();
    CHECK(energy >= 0.8);
    CHECK(energy <= 1.25);
  }
}

TEST_CASE("forward reports the offending layer on overflow") {
  Network net;
  net.widths = {2, 2, 2};
  net.weights = {Mat::Constant(2, 2, 1e308), Mat::Constant(2, 2, 1e308)};
  net.activations = acts({Act::linear, Act::linear});
  Mat x = Mat::Constant(2, 1, 10.0);
  try {
    forward(net, x);
    FAIL("expected overflow");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("weight snapshot JSON round trip is bit exact") {
  Rng rng(13);
  Network net = init({3, 7, 2}, acts({Act::relu, Act::softmax}), rng);
  Network back = from_json(to_json(net));
  CHECK(back.widths == net.widths);
  REQUIRE(back.weights.size() == net.weights.size());
  for (std::size_t h = 0; h < net.weights.size(); ++h) {
    CHECK(back.activations[h].tag == net.activations[h].tag);
    CHECK((back.weights[h] - net.weights[h]).cwiseAbs().maxCoeff() == 0.0);
  }
  auto path = std::filesystem::temp_directory_path() / "physlab_test_net.json";
  save_json(net, path);
  Network loaded = load_json(path);
  for (std::size_t h = 0; h < net.weights.size(); ++h)
    CHECK((loaded.weights[h] - net.weights[h]).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("cross entropy rejects non-probability predictions") {
  Mat pred(2, 1);
  pred << 0.9, 0.3;  // sums to 1.2
  Mat target(2, 1);
  target << 1.0, 0.0;
  CHECK_THROWS_AS(loss_value({LossTag::cross_entropy}, pred, target), std::invalid_argument);
}
