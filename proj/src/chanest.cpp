#include "physlab/chanest.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "physlab/csv.hpp"

namespace physlab::chanest {

OfdmChannelModel OfdmChannelModel::from_pdp(int n_c, const Vec& pdp) {
  if (n_c < 2) throw std::invalid_argument("channel model: need at least 2 subcarriers");
  if (pdp.size() < 1 || pdp.size() > n_c)
    throw std::invalid_argument("channel model: tap count must be in [1, n_c]");
  if (pdp.minCoeff() < 0.0) throw std::invalid_argument("channel model: negative tap power");
  double total = pdp.sum();
  if (total <= 0.0) throw std::invalid_argument("channel model: zero total tap power");

  OfdmChannelModel model;
  model.n_c = n_c;
  model.pdp = pdp / total;
  const int taps = static_cast<int>(pdp.size());
  model.dft = CMat(n_c, taps);
  for (int k = 0; k < n_c; ++k)
    for (int l = 0; l < taps; ++l) {
      double phase = -2.0 * M_PI * k * l / n_c;
      model.dft(k, l) = Cplx(std::cos(phase), std::sin(phase));
    }
  model.r_hh = model.dft * model.pdp.asDiagonal() * model.dft.adjoint();
  return model;
}

OfdmChannelModel OfdmChannelModel::exponential(int n_c, int taps, double decay) {
  if (taps <= 0) taps = std::max(1, n_c / 16);
  Vec pdp(taps);
  for (int l = 0; l < taps; ++l) pdp[l] = std::exp(-l / decay);
  return from_pdp(n_c, pdp);
}

OfdmChannelModel OfdmChannelModel::uniform(int n_c, int taps) {
  return from_pdp(n_c, Vec::Ones(taps));
}

double noise_var_for_snr(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

CVec sample_channel(const OfdmChannelModel& model, Rng& rng) {
  CVec g(model.taps());
  for (int l = 0; l < model.taps(); ++l) g[l] = rng.cnormal(model.pdp[l]);
  return model.dft * g;
}

CVec ls_estimate(const OfdmChannelModel& model, const CVec& h, double noise_var, Rng& rng) {
  if (noise_var <= 0.0) throw std::invalid_argument("ls_estimate: noise variance must be positive");
  CVec n(model.n_c);
  for (int k = 0; k < model.n_c; ++k) n[k] = rng.cnormal(noise_var);
  return h + n;
}

CMat lmmse_operator(const OfdmChannelModel& model, double noise_var) {
  if (noise_var <= 0.0)
    throw std::invalid_argument("lmmse_estimate: noise variance must be positive");
  CMat a = model.r_hh + noise_var * CMat::Identity(model.n_c, model.n_c);
  // W = R (R + s I)^{-1}  =>  W^H = (R + s I)^{-1} R, solved column-wise.
  CMat wh = herm_solve(a, model.r_hh);
  CMat w = wh.adjoint();
  double residual = (w * a - model.r_hh).norm() / std::max(1.0, model.r_hh.norm());
  if (residual > 1e-8)
    throw std::runtime_error("lmmse_estimate: solver residual " + std::to_string(residual));
  return w;
}

CVec lmmse_estimate(const OfdmChannelModel& model, const CVec& v, double noise_var) {
  return lmmse_operator(model, noise_var) * v;
}

double ls_analytic_mse(const OfdmChannelModel& model, double noise_var) {
  return model.n_c * noise_var;
}

double lmmse_analytic_mse(const OfdmChannelModel& model, double noise_var) {
  CMat a = CMat::Identity(model.n_c, model.n_c) + model.r_hh / noise_var;
  CMat x = herm_solve(a, CMat::Identity(model.n_c, model.n_c));
  return (model.r_hh * x).trace().real();
}

double analytic_gaussian_mi(const OfdmChannelModel& model, double noise_var) {
  const int d = model.n_c;
  const double ridge = 1e-12;
  CMat r_hh = model.r_hh + ridge * CMat::Identity(d, d);
  CMat r_vv = r_hh + noise_var * CMat::Identity(d, d);
  // R_ee = R_hh - R_hv R_vv^{-1} R_vh with R_hv = R_hh.
  CMat x = herm_solve(r_vv, r_hh);
  CMat r_ee = r_hh - r_hh * x;
  r_ee = 0.5 * (r_ee + r_ee.adjoint());

  auto logdet = [](const CMat& m) {
    Eigen::LLT<CMat> llt(m);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("analytic_gaussian_mi: covariance lost positive definiteness");
    double sum = 0.0;
    for (int i = 0; i < m.rows(); ++i) sum += std::log(llt.matrixL()(i, i).real());
    return 2.0 * sum;
  };
  return logdet(r_hh) - logdet(r_ee + ridge * CMat::Identity(d, d));
}

EstimationDataset build_dataset(const OfdmChannelModel& model, int n, double snr_db,
                                int pilot_spacing, Rng& rng) {
  if (n < 1) throw std::invalid_argument("build_dataset: need at least one sample");
  if (pilot_spacing < 1 || model.n_c % pilot_spacing != 0)
    throw std::invalid_argument("build_dataset: pilot spacing must divide n_c");
  double noise_var = noise_var_for_snr(snr_db);

  EstimationDataset data;
  data.snr_db = snr_db;
  data.pilot_spacing = pilot_spacing;
  data.v = CMat(model.n_c, n);
  data.z = CMat(model.n_c, n);

  const int n_pilots = model.n_c / pilot_spacing;
  for (int i = 0; i < n; ++i) {
    CVec h = sample_channel(model, rng);
    data.z.col(i) = h;
    if (pilot_spacing == 1) {
      data.v.col(i) = ls_estimate(model, h, noise_var, rng);
      continue;
    }
    // LS at the pilot positions, then linear interpolation per part; the
    // tail beyond the last pilot holds the last pilot value.
    CVec pilots(n_pilots);
    for (int p = 0; p < n_pilots; ++p)
      pilots[p] = h[p * pilot_spacing] + rng.cnormal(noise_var);
    for (int k = 0; k < model.n_c; ++k) {
      int p = k / pilot_spacing;
      if (p + 1 >= n_pilots) {
        data.v(k, i) = pilots[n_pilots - 1];
        continue;
      }
      double t = static_cast<double>(k - p * pilot_spacing) / pilot_spacing;
      data.v(k, i) = (1.0 - t) * pilots[p] + t * pilots[p + 1];
    }
  }
  return data;
}

double dataset_mse(const EstimationDataset& data) {
  return (data.v - data.z).squaredNorm() / data.size();
}

Mat EstimationDataset::v_real() const {
  Mat out(2 * v.rows(), v.cols());
  out.topRows(v.rows()) = v.real();
  out.bottomRows(v.rows()) = v.imag();
  return out;
}

Mat EstimationDataset::z_real() const {
  Mat out(2 * z.rows(), z.cols());
  out.topRows(z.rows()) = z.real();
  out.bottomRows(z.rows()) = z.imag();
  return out;
}

NnTrainResult train_nn_estimator(const EstimationDataset& train, const NnConfig& cfg, Rng& rng) {
  if (cfg.hidden_layers < 1)
    throw std::invalid_argument("train_nn_estimator: need at least one hidden layer");
  const int io = static_cast<int>(2 * train.v.rows());
  std::vector<int> widths{io};
  std::vector<neural::Activation> acts;
  for (int h = 0; h < cfg.hidden_layers; ++h) {
    widths.push_back(cfg.width);
    acts.push_back(neural::Activation::make(cfg.activation));
  }
  widths.push_back(io);
  acts.push_back(neural::Activation::make(neural::Act::linear));

  NnTrainResult result;
  result.net = neural::init(widths, acts, rng);

  const Mat x = train.v_real();
  const Mat y = train.z_real();
  const int n = static_cast<int>(x.cols());
  const int batch = std::max(1, std::min(cfg.batch, n));
  const neural::Loss loss{neural::LossTag::square};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int batches = 0;
    // Fixed sequential minibatch order keeps runs reproducible.
    for (int start = 0; start < n; start += batch) {
      int count = std::min(batch, n - start);
      Mat xb = x.middleCols(start, count);
      Mat yb = y.middleCols(start, count);
      neural::Forward fwd = neural::forward(result.net, xb);
      double l = neural::loss_value(loss, fwd.activations.back(), yb);
      if (!std::isfinite(l)) {
        result.diverged = true;
        result.diverged_epoch = epoch;
        return result;
      }
      epoch_loss += l;
      ++batches;
      neural::Backward back = neural::backward(result.net, fwd, loss, yb);
      neural::sgd_step(result.net, back.weight_grads, cfg.eta);
    }
    result.epoch_loss.push_back(epoch_loss / batches);
  }
  return result;
}

double evaluate_mse(const neural::Network& net, const EstimationDataset& data) {
  neural::Forward fwd = neural::forward(net, data.v_real());
  return (fwd.activations.back() - data.z_real()).squaredNorm() / data.size();
}

DepthSweepResult depth_sweep(const OfdmChannelModel& model, int n_train,
                             const std::vector<int>& depths, int trials, double snr_db,
                             const NnConfig& base, int n_test, Rng& rng) {
  for (std::size_t i = 1; i < depths.size(); ++i)
    if (depths[i] < depths[i - 1])
      throw std::invalid_argument("depth_sweep: depths must be ascending");
  DepthSweepResult result;
  result.depths = depths;
  result.per_trial = Mat::Zero(trials, static_cast<Eigen::Index>(depths.size()));
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng = rng.derive("trial/" + std::to_string(t));
    Rng data_rng = trial_rng.derive("data");
    EstimationDataset train = build_dataset(model, n_train, snr_db, 4, data_rng);
    EstimationDataset test = build_dataset(model, n_test, snr_db, 4, data_rng);
    for (std::size_t di = 0; di < depths.size(); ++di) {
      NnConfig cfg = base;
      cfg.hidden_layers = depths[di];
      Rng net_rng = trial_rng.derive("depth/" + std::to_string(depths[di]));
      NnTrainResult trained = train_nn_estimator(train, cfg, net_rng);
      result.per_trial(t, static_cast<Eigen::Index>(di)) =
          trained.diverged ? std::numeric_limits<double>::quiet_NaN()
                           : evaluate_mse(trained.net, test);
    }
  }
  result.mean_mse.resize(depths.size());
  for (std::size_t di = 0; di < depths.size(); ++di)
    result.mean_mse[di] = result.per_trial.col(static_cast<Eigen::Index>(di)).mean();
  return result;
}

void write_dataset_csv(const EstimationDataset& data, const std::filesystem::path& path) {
  csv::Table table({"sample", "subcarrier", "v_re", "v_im", "z_re", "z_im"});
  for (int i = 0; i < data.size(); ++i)
    for (int k = 0; k < data.v.rows(); ++k)
      table.add_row({csv::fmt(i), csv::fmt(k), csv::fmt(data.v(k, i).real()),
                     csv::fmt(data.v(k, i).imag()), csv::fmt(data.z(k, i).real()),
                     csv::fmt(data.z(k, i).imag())});
  table.write(path);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  csv::Table table({"estimator", "snr_db", "n_train", "depth", "width", "mse", "n_test", "seed"});
  for (const SweepRow& r : rows)
    table.add_row({r.estimator, csv::fmt(r.snr_db), csv::fmt(r.n_train), csv::fmt(r.depth),
                   csv::fmt(r.width), csv::fmt(r.mse), csv::fmt(r.n_test), csv::fmt(r.seed)});
  table.write(path);
}

}  // namespace physlab::chanest
