#include "physlab/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physlab/csv.hpp"

namespace physlab::ntk {

EmpiricalGram empirical_gram(const neural::Network& net, const Mat& inputs, int target_index) {
  net.validate();
  const Eigen::Index n = inputs.cols();
  if (n < 1) throw std::invalid_argument("empirical_gram: need at least one input");
  if (target_index < 0 || target_index >= net.widths.back())
    throw std::invalid_argument("empirical_gram: target index out of range");

  // Flattened per-sample gradient of the scalar prediction, one row per
  // sample and one block per layer.
  const int depth = net.depth();
  std::vector<Mat> flat(depth);
  for (int h = 0; h < depth; ++h)
    flat[h] = Mat(n, net.weights[h].size());

  Vec dout = Vec::Zero(net.widths.back());
  dout[target_index] = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    neural::Forward fwd = neural::forward(net, inputs.col(i));
    neural::Backward back = neural::backward_from_output(net, fwd, dout);
    for (int h = 0; h < depth; ++h)
      flat[h].row(i) = Eigen::Map<const Vec>(back.weight_grads[h].data(),
                                             back.weight_grads[h].size());
  }

  EmpiricalGram out;
  out.per_layer.reserve(depth);
  out.total = Mat::Zero(n, n);
  for (int h = 0; h < depth; ++h) {
    Mat g = flat[h] * flat[h].transpose();
    g = 0.5 * (g + g.transpose());
    out.total += g;
    out.per_layer.push_back(std::move(g));
  }
  return out;
}

namespace {

// E[relu(u) relu(v)] under N(0, [[s1^2, rho s1 s2], [., s2^2]]), reduced to a
// smooth one-dimensional integral via the conditional mean of relu(v) | u.
double relu_moment(double s1, double s2, double rho) {
  if (s1 <= 0.0 || s2 <= 0.0) return 0.0;
  double r2 = 1.0 - rho * rho;
  if (r2 < 1e-14) return rho > 0.0 ? 0.5 * s1 * s2 : 0.0;
  double beta = rho / std::sqrt(r2);
  double integral = gauss_legendre(
      [&](double x) {
        return x * normal_pdf(x) *
               (rho * x * normal_cdf(beta * x) + std::sqrt(r2) * normal_pdf(beta * x));
      },
      0.0, 13.0);
  return s1 * s2 * integral;
}

// P(u > 0, v > 0) for the same covariance: the relu-derivative moment.
double quadrant_probability(double rho) {
  double r2 = 1.0 - rho * rho;
  if (r2 < 1e-14) return rho > 0.0 ? 0.5 : 0.0;
  double beta = rho / std::sqrt(r2);
  return gauss_legendre([&](double x) { return normal_pdf(x) * normal_cdf(beta * x); }, 0.0,
                        13.0);
}

void check_cov(const Mat& cov) {
  if (cov.rows() != 2 || cov.cols() != 2)
    throw std::invalid_argument("activation moment: covariance must be 2x2");
  if (cov(0, 0) < -1e-12 || cov(1, 1) < -1e-12)
    throw std::domain_error("activation moment: negative variance");
}

double correlation(const Mat& cov) {
  double s1 = std::sqrt(std::max(cov(0, 0), 0.0));
  double s2 = std::sqrt(std::max(cov(1, 1), 0.0));
  if (s1 <= 0.0 || s2 <= 0.0) return 0.0;
  return std::clamp(cov(0, 1) / (s1 * s2), -1.0, 1.0);
}

// Escalating Gauss-Hermite for smooth integrands (softplus); the two orders
// must agree to 1e-8 or the recursion refuses to continue.
double escalating_gh(const Mat& cov, const std::function<double(double, double)>& f) {
  double lo = gauss_hermite_2d(cov, f, 32);
  double hi = gauss_hermite_2d(cov, f, 64);
  if (std::abs(hi - lo) > 1e-8)
    throw std::runtime_error(
        "activation moment: quadrature failed to converge (order 32 vs 64 differ by " +
        std::to_string(std::abs(hi - lo)) + ")");
  return hi;
}

}  // namespace

double activation_moment(neural::Act act, const Mat& cov) {
  check_cov(cov);
  switch (act) {
    case neural::Act::linear:
      return cov(0, 1);
    case neural::Act::relu:
      return relu_moment(std::sqrt(std::max(cov(0, 0), 0.0)),
                         std::sqrt(std::max(cov(1, 1), 0.0)), correlation(cov));
    case neural::Act::softplus:
      return escalating_gh(cov, [](double u, double v) {
        return neural::act_value(neural::Act::softplus, u) *
               neural::act_value(neural::Act::softplus, v);
      });
    case neural::Act::softmax:
      break;
  }
  throw std::invalid_argument("activation_moment: unsupported activation");
}

double activation_deriv_moment(neural::Act act, const Mat& cov) {
  check_cov(cov);
  switch (act) {
    case neural::Act::linear:
      return 1.0;
    case neural::Act::relu: {
      if (cov(0, 0) <= 0.0 || cov(1, 1) <= 0.0) return 0.0;
      return quadrant_probability(correlation(cov));
    }
    case neural::Act::softplus:
      return escalating_gh(cov, [](double u, double v) {
        return neural::act_deriv(neural::Act::softplus, u) *
               neural::act_deriv(neural::Act::softplus, v);
      });
    case neural::Act::softmax:
      break;
  }
  throw std::invalid_argument("activation_deriv_moment: unsupported activation");
}

NtkLimit limit_gram(const Mat& inputs, int depth, neural::Act act) {
  if (depth < 1) throw std::invalid_argument("limit_gram: depth must be >= 1");
  if (act != neural::Act::relu && act != neural::Act::softplus && act != neural::Act::linear)
    throw std::invalid_argument("limit_gram: activation must be relu, softplus or linear");
  const Eigen::Index n = inputs.cols();
  if (n < 1) throw std::invalid_argument("limit_gram: need inputs");

  // Unit-normalize inputs before the recursion.
  Mat x = inputs;
  for (Eigen::Index j = 0; j < n; ++j) {
    double norm = x.col(j).norm();
    if (norm <= 0.0) throw std::invalid_argument("limit_gram: zero-norm input");
    x.col(j) /= norm;
  }
  const double c_sigma = neural::Activation::make(act).c_sigma;

  NtkLimit out;
  out.activation_kernels.reserve(depth + 1);
  out.derivative_factors.reserve(depth);
  Mat k0 = x.transpose() * x;
  k0 = 0.5 * (k0 + k0.transpose());
  out.activation_kernels.push_back(k0);

  for (int h = 1; h <= depth; ++h) {
    const Mat& prev = out.activation_kernels.back();
    Mat k(n, n);
    Mat dk(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        Mat cov(2, 2);
        cov << prev(i, i), prev(i, j), prev(j, i), prev(j, j);
        k(i, j) = c_sigma * activation_moment(act, cov);
        k(j, i) = k(i, j);
        dk(i, j) = c_sigma * activation_deriv_moment(act, cov);
        dk(j, i) = dk(i, j);
      }
    }
    out.activation_kernels.push_back(std::move(k));
    out.derivative_factors.push_back(std::move(dk));
  }

  // Limit of G^(h): K^(h-1) (.) prod_{l >= h} of the derivative factors; the
  // scalar head contributes K^(depth) itself.
  out.per_layer.assign(depth + 1, Mat());
  out.per_layer[depth] = out.activation_kernels[depth];
  Mat running = Mat::Ones(n, n);
  for (int h = depth; h >= 1; --h) {
    running = running.cwiseProduct(out.derivative_factors[h - 1]);
    out.per_layer[h - 1] = out.activation_kernels[h - 1].cwiseProduct(running);
  }
  out.ntk = out.per_layer[depth - 1];
  return out;
}

double spectral_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("spectral_distance: shape mismatch");
  SymEig eig = sym_eig(a - b, 1e-8);
  double lo = std::abs(eig.values[eig.values.size() - 1]);
  double hi = std::abs(eig.values[0]);
  return std::max(lo, hi);
}

neural::Network make_probe_network(int input_dim, int width, int depth, neural::Act act,
                                   Rng& rng) {
  std::vector<int> widths{input_dim};
  std::vector<neural::Activation> acts;
  for (int h = 0; h < depth; ++h) {
    widths.push_back(width);
    acts.push_back(neural::Activation::make(act));
  }
  widths.push_back(1);
  acts.push_back(neural::Activation::make(neural::Act::linear));
  return neural::init(widths, acts, rng);
}

WidthSweepResult width_sweep(const Mat& inputs, int depth, const std::vector<int>& widths,
                             int seeds, neural::Act act, std::uint64_t seed0) {
  for (std::size_t i = 1; i < widths.size(); ++i)
    if (widths[i] <= widths[i - 1])
      throw std::invalid_argument("width_sweep: widths must be ascending");

  Mat x = inputs;
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j).normalize();
  NtkLimit limit = limit_gram(x, depth, act);

  WidthSweepResult result;
  result.widths = widths;
  for (int width : widths) {
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(mix_seed(seed0, "width/" + std::to_string(width) + "/seed/" + std::to_string(s)));
      neural::Network net =
          make_probe_network(static_cast<int>(x.rows()), width, depth, act, rng);
      EmpiricalGram emp = empirical_gram(net, x, 0);
      for (int layer = 1; layer <= depth + 1; ++layer) {
        double dist = spectral_distance(emp.per_layer[layer - 1], limit.per_layer[layer - 1]);
        result.rows.push_back({width, depth, static_cast<std::uint64_t>(s), layer, dist});
        if (layer == depth) {
          sum += dist;
          sum_sq += dist * dist;
        }
      }
    }
    double mean = sum / seeds;
    result.mean_distance.push_back(mean);
    result.std_distance.push_back(std::sqrt(std::max(0.0, sum_sq / seeds - mean * mean)));
  }
  return result;
}

namespace {

std::vector<double> drift_row(const endtoend::AeSystem& sys,
                              const std::vector<Mat>& initial_weights) {
  std::vector<double> row;
  std::size_t idx = 0;
  for (const Mat& w : sys.encoder.weights) {
    row.push_back((w - initial_weights[idx]).norm() / std::sqrt(w.rows()));
    ++idx;
  }
  for (const Mat& w : sys.decoder.weights) {
    row.push_back((w - initial_weights[idx]).norm() / std::sqrt(w.rows()));
    ++idx;
  }
  return row;
}

DriftTrace run_drift(endtoend::AeSystem sys, int iterations, double eta, std::uint64_t seed,
                     int record_every) {
  std::vector<Mat> initial = sys.encoder.weights;
  for (const Mat& w : sys.decoder.weights) initial.push_back(w);

  DriftTrace trace;
  trace.kind = sys.channel.kind;
  trace.seed = seed;
  Rng rng(seed);
  trace.iterations.push_back(0);
  trace.drift.push_back(drift_row(sys, initial));
  for (int k = 1; k <= iterations; ++k) {
    double l = endtoend::train_epoch(sys, eta, rng);
    if (!std::isfinite(l)) break;  // diverged; the recorded prefix stands
    if (k % record_every == 0 || k == iterations) {
      trace.iterations.push_back(k);
      trace.drift.push_back(drift_row(sys, initial));
    }
  }
  return trace;
}

}  // namespace

DriftPair fading_drift(const endtoend::AeSystem& sys, int iterations, double eta, Rng& rng,
                       int record_every) {
  if (sys.channel.kind != endtoend::ChannelKind::rayleigh_flat)
    throw std::invalid_argument("fading_drift: system must use the Rayleigh fading channel");
  if (record_every < 1) record_every = 1;
  DriftPair pair;
  pair.fading = run_drift(sys, iterations, eta, rng.seed(), record_every);
  endtoend::AeSystem companion = sys;
  companion.channel.kind = endtoend::ChannelKind::awgn;
  pair.awgn = run_drift(companion, iterations, eta, rng.seed(), record_every);
  return pair;
}

void write_sweep_csv(const WidthSweepResult& result, const std::filesystem::path& path) {
  csv::Table table({"width", "depth", "seed", "layer", "distance"});
  for (const WidthSweepRow& r : result.rows)
    table.add_row({csv::fmt(r.width), csv::fmt(r.depth), csv::fmt(r.seed), csv::fmt(r.layer),
                   csv::fmt(r.distance)});
  table.write(path);
}

void write_drift_csv(const DriftPair& pair, const std::filesystem::path& path) {
  csv::Table table({"iteration", "layer", "drift", "channel_kind", "seed"});
  auto emit = [&](const DriftTrace& t) {
    for (std::size_t i = 0; i < t.iterations.size(); ++i)
      for (std::size_t h = 0; h < t.drift[i].size(); ++h)
        table.add_row({csv::fmt(t.iterations[i]), csv::fmt(static_cast<int>(h + 1)),
                       csv::fmt(t.drift[i][h]), endtoend::channel_kind_name(t.kind),
                       csv::fmt(t.seed)});
  };
  emit(pair.fading);
  emit(pair.awgn);
  table.write(path);
}

}  // namespace physlab::ntk
