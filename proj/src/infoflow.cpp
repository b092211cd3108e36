#include "physlab/infoflow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "physlab/csv.hpp"

namespace physlab::infoflow {

void GramMatrix::validate(double sym_tol, double psd_tol, double trace_tol) const {
  if (a.rows() != a.cols()) throw std::invalid_argument("gram: not square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > sym_tol)
    throw std::invalid_argument("gram: not symmetric");
  if (std::abs(a.trace() - 1.0) > trace_tol)
    throw std::invalid_argument("gram: trace differs from 1");
  SymEig eig = sym_eig(a, 1e-9);
  if (eig.values.minCoeff() < -psd_tol)
    throw std::invalid_argument("gram: not positive semi-definite");
}

double silverman_width(const Mat& samples_rows) {
  const Eigen::Index n = samples_rows.rows();
  const Eigen::Index d = samples_rows.cols();
  if (n < 2) throw std::invalid_argument("silverman_width: need at least 2 samples");
  Eigen::RowVectorXd mean = samples_rows.colwise().mean();
  Mat centered = samples_rows.rowwise() - mean;
  double avg_var = centered.squaredNorm() / (static_cast<double>(n - 1) * d);
  double spread = std::sqrt(avg_var);
  double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  return spread * factor;
}

GramMatrix gram(const Mat& samples_rows, double kernel_width) {
  const Eigen::Index n = samples_rows.rows();
  if (n < 2) throw std::invalid_argument("gram: need at least 2 samples");
  if (kernel_width == 0.0) throw std::domain_error("gram: zero kernel width");
  double width = kernel_width;
  if (width < 0.0) {
    width = silverman_width(samples_rows);
    if (width <= 0.0) width = 1.0;  // zero spread: any width gives the same Gram
  }

  // Gaussian kernel has unit diagonal, so the appendix normalization reduces
  // to K/n with diagonal entries exactly 1/n.
  Mat sq_norms = samples_rows.rowwise().squaredNorm();
  Mat dist2 = sq_norms.replicate(1, n) + sq_norms.transpose().replicate(n, 1) -
              2.0 * samples_rows * samples_rows.transpose();
  GramMatrix g;
  g.kernel_width = width;
  g.a = (dist2.cwiseMax(0.0) * (-1.0 / (2.0 * width * width))).array().exp() / n;
  g.a = 0.5 * (g.a + g.a.transpose());
  g.a.diagonal().setConstant(1.0 / n);
  return g;
}

namespace {

double entropy_from_eigenvalues(const Vec& values, double alpha) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    double lam = values[i];
    if (lam <= 0.0) continue;  // clip numerical negatives
    sum += std::pow(lam, alpha);
  }
  if (sum <= 0.0) throw std::runtime_error("renyi_entropy: empty spectrum");
  return std::log2(sum) / (1.0 - alpha);
}

Vec gram_eigenvalues(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("gram eigendecomposition failed");
  return es.eigenvalues();
}

}  // namespace

double renyi_entropy(const GramMatrix& g, double alpha) {
  if (alpha <= 0.0) throw std::domain_error("renyi_entropy: alpha must be positive");
  if (alpha == 1.0)
    throw std::domain_error("renyi_entropy: alpha = 1 is the Shannon limit; use a value near 1");
  return entropy_from_eigenvalues(gram_eigenvalues(g.a), alpha);
}

double joint_entropy(const GramMatrix& ga, const GramMatrix& gb, double alpha) {
  if (ga.size() != gb.size()) throw std::invalid_argument("joint_entropy: size mismatch");
  Mat prod = ga.a.cwiseProduct(gb.a);
  double trace = prod.trace();
  if (trace <= 0.0) throw std::runtime_error("joint_entropy: Hadamard product has zero trace");
  GramMatrix joint;
  joint.a = prod / trace;
  joint.kernel_width = ga.kernel_width;
  return renyi_entropy(joint, alpha);
}

double mutual_information(const GramMatrix& ga, const GramMatrix& gb, double alpha) {
  return renyi_entropy(ga, alpha) + renyi_entropy(gb, alpha) - joint_entropy(ga, gb, alpha);
}

double conditional_entropy(const GramMatrix& gz, const GramMatrix& gv, double alpha) {
  return joint_entropy(gz, gv, alpha) - renyi_entropy(gv, alpha);
}

std::vector<int> default_snapshots(int iterations) {
  std::vector<int> out;
  int step = 1;
  for (int k = 0; k <= iterations;) {
    out.push_back(k);
    if (k >= 10 * step) step *= 2;
    k += step;
  }
  if (out.back() != iterations) out.push_back(iterations);
  return out;
}

InfoPlaneTrace record_planes(neural::Network& net, const chanest::EstimationDataset& data,
                             const PlaneConfig& cfg, Rng& rng) {
  net.validate();
  const Mat x = data.v_real();
  const Mat y = data.z_real();
  const int n = static_cast<int>(x.cols());
  const int batch = std::max(1, std::min(cfg.batch, n));
  const int n_gram = std::min(cfg.gram_samples, n);
  const int hidden = net.depth() - 1;
  if (hidden < 1) throw std::invalid_argument("record_planes: network has no hidden layer");
  const neural::Loss loss{neural::LossTag::square};

  std::vector<int> snapshots = cfg.snapshots.empty() ? default_snapshots(cfg.iterations)
                                                      : cfg.snapshots;
  std::sort(snapshots.begin(), snapshots.end());

  InfoPlaneTrace trace;
  trace.alpha = cfg.alpha;
  trace.seed = rng.seed();

  const Mat x_gram = x.leftCols(n_gram);
  const Mat y_gram = y.leftCols(n_gram);
  GramMatrix g_v = gram(x_gram.transpose(), cfg.kernel_width);

  auto snapshot = [&](int iteration, double mse) {
    neural::Forward fwd = neural::forward(net, x_gram);
    GramMatrix g_vp = gram(fwd.activations.back().transpose(), cfg.kernel_width);
    std::vector<GramMatrix> g_t(hidden);
    for (int h = 0; h < hidden; ++h)
      g_t[h] = gram(fwd.activations[h + 1].transpose(), cfg.kernel_width);
    for (int h = 0; h < hidden; ++h) {
      InfoPlaneRecord rec;
      rec.iteration = iteration;
      rec.layer = h + 1;
      rec.i_tv = mutual_information(g_t[h], g_v, cfg.alpha);
      rec.i_tvp = mutual_information(g_t[h], g_vp, cfg.alpha);
      rec.i_ttp = mutual_information(g_t[h], g_t[hidden - 1 - h], cfg.alpha);
      rec.mse = mse;
      rec.kernel_width = g_t[h].kernel_width;
      trace.records.push_back(rec);
    }
  };

  auto full_mse = [&]() {
    neural::Forward fwd = neural::forward(net, x);
    return (fwd.activations.back() - y).squaredNorm() / n;
  };

  std::size_t snap_idx = 0;
  int cursor = 0;  // next minibatch start
  for (int iteration = 0; iteration <= cfg.iterations; ++iteration) {
    double mse = full_mse();
    trace.mse_per_iteration.push_back(mse);
    while (snap_idx < snapshots.size() && snapshots[snap_idx] == iteration) {
      snapshot(iteration, mse);
      ++snap_idx;
    }
    if (iteration == cfg.iterations) break;
    Mat xb, yb;
    int count = std::min(batch, n - cursor);
    xb = x.middleCols(cursor, count);
    yb = y.middleCols(cursor, count);
    cursor += count;
    if (cursor >= n) cursor = 0;
    neural::Forward fwd = neural::forward(net, xb);
    neural::Backward back = neural::backward(net, fwd, loss, yb);
    neural::sgd_step(net, back.weight_grads, cfg.eta);
  }
  return trace;
}

RiskGap risk_gap(const neural::Network& net, const Mat& x_train, const Mat& y_train,
                 const Mat& x_test, const Mat& y_test, const neural::Loss& loss) {
  RiskGap out;
  out.empirical =
      neural::loss_value(loss, neural::forward(net, x_train).activations.back(), y_train);
  out.population_estimate =
      neural::loss_value(loss, neural::forward(net, x_test).activations.back(), y_test);
  out.gap = out.population_estimate - out.empirical;
  return out;
}

void write_planes_csv(const InfoPlaneTrace& trace, const std::filesystem::path& path) {
  csv::Table table(
      {"iteration", "layer", "i_tv", "i_tvp", "i_ttp", "mse", "alpha", "kernel_width", "seed"});
  for (const InfoPlaneRecord& r : trace.records)
    table.add_row({csv::fmt(r.iteration), csv::fmt(r.layer), csv::fmt(std::max(0.0, r.i_tv)),
                   csv::fmt(std::max(0.0, r.i_tvp)), csv::fmt(std::max(0.0, r.i_ttp)),
                   csv::fmt(r.mse), csv::fmt(trace.alpha), csv::fmt(r.kernel_width),
                   csv::fmt(trace.seed)});
  table.write(path);
}

}  // namespace physlab::infoflow
