#include "physlab/endtoend.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "physlab/csv.hpp"

namespace physlab::endtoend {

const char* channel_kind_name(ChannelKind kind) {
  return kind == ChannelKind::awgn ? "awgn" : "rayleigh_flat";
}

ChannelOut channel_forward(ChannelLayer& layer, const Vec& z, Rng& rng) {
  if (!z.allFinite()) throw std::invalid_argument("channel_forward: non-finite input");
  if (layer.noise_var < 0.0) throw std::invalid_argument("channel_forward: negative noise variance");
  const Eigen::Index d = z.size();
  Vec h = Vec::Ones(d);
  if (layer.kind == ChannelKind::rayleigh_flat) {
    if (layer.pinned_h_diag)
      h = *layer.pinned_h_diag;
    else
      h = rng.normal_vec(d);
  }
  Vec n;
  if (layer.pinned_noise)
    n = *layer.pinned_noise;
  else
    n = std::sqrt(layer.noise_var) * rng.normal_vec(d);
  ChannelOut out;
  out.v = h.cwiseProduct(z) + n;
  out.equivalent = Mat::Zero(d, d + 1);
  out.equivalent.leftCols(d) = h.asDiagonal();
  out.equivalent.col(d) = n;
  layer.last_equivalent = out.equivalent;
  return out;
}

ChannelBatch channel_forward_batch(ChannelLayer& layer, const Mat& z, Rng& rng) {
  ChannelBatch out;
  out.h_diag = Mat::Ones(z.rows(), z.cols());
  out.noise = Mat(z.rows(), z.cols());
  double sd = std::sqrt(layer.noise_var);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (layer.kind == ChannelKind::rayleigh_flat) {
      if (layer.pinned_h_diag)
        out.h_diag.col(j) = *layer.pinned_h_diag;
      else
        out.h_diag.col(j) = rng.normal_vec(z.rows());
    }
    if (layer.pinned_noise)
      out.noise.col(j) = *layer.pinned_noise;
    else
      out.noise.col(j) = sd * rng.normal_vec(z.rows());
  }
  out.v = out.h_diag.cwiseProduct(z) + out.noise;
  // Keep the equivalent-weight view of the last sample for inspection.
  const Eigen::Index d = z.rows();
  Mat eq = Mat::Zero(d, d + 1);
  eq.leftCols(d) = Vec(out.h_diag.col(z.cols() - 1)).asDiagonal();
  eq.col(d) = out.noise.col(z.cols() - 1);
  layer.last_equivalent = eq;
  return out;
}

double power_scale(const Mat& batch_cols, int alphabet_size) {
  if (batch_cols.cols() == 0) throw std::invalid_argument("power_normalize: empty batch");
  double mean_sq = batch_cols.squaredNorm() / batch_cols.cols();
  if (mean_sq <= 0.0)
    throw std::runtime_error("power_normalize: degenerate encoder, all-zero batch");
  return std::sqrt(1.0 / (mean_sq * alphabet_size));
}

Mat power_normalize(const Mat& batch_rows, int alphabet_size) {
  return power_scale(batch_rows.transpose(), alphabet_size) * batch_rows;
}

double noise_var_for_snr(double snr_db, int alphabet_size, int dim) {
  double signal_power = 1.0 / alphabet_size;
  return signal_power * std::pow(10.0, -snr_db / 10.0) / dim;
}

void AeSystem::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.widths.front() != alphabet_size)
    throw std::invalid_argument("ae: encoder input width must equal M");
  if (encoder.widths.back() != dim)
    throw std::invalid_argument("ae: encoder output width must equal d");
  if (decoder.widths.front() != dim)
    throw std::invalid_argument("ae: decoder input width must equal d");
  if (decoder.widths.back() != alphabet_size)
    throw std::invalid_argument("ae: decoder output width must equal M");
}

AeSystem make_default_system(int alphabet_size, int dim, double snr_db, ChannelKind kind,
                             Rng& rng) {
  using neural::Act;
  using neural::Activation;
  AeSystem sys;
  sys.alphabet_size = alphabet_size;
  sys.dim = dim;
  sys.p_av = 1.0 / alphabet_size;
  sys.encoder = neural::init({alphabet_size, alphabet_size, dim},
                             {Activation::make(Act::relu), Activation::make(Act::linear)}, rng);
  sys.decoder = neural::init({dim, alphabet_size, alphabet_size},
                             {Activation::make(Act::relu), Activation::make(Act::softmax)}, rng);
  sys.channel.kind = kind;
  sys.channel.noise_var = noise_var_for_snr(snr_db, alphabet_size, dim);
  return sys;
}

namespace {

std::vector<double> system_fro_norms(const AeSystem& sys) {
  std::vector<double> fro = neural::frobenius_norms(sys.encoder);
  for (double f : neural::frobenius_norms(sys.decoder)) fro.push_back(f);
  return fro;
}

}  // namespace

double train_epoch(AeSystem& sys, double eta, Rng& rng) {
  const int m = sys.alphabet_size;
  const Mat symbols = Mat::Identity(m, m);
  const neural::Loss loss{neural::LossTag::cross_entropy};

  neural::Forward enc;
  try {
    enc = neural::forward(sys.encoder, symbols);
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const Mat& x = enc.activations.back();  // d x M
  double mean_sq = x.squaredNorm() / m;
  if (mean_sq <= 0.0 || !std::isfinite(mean_sq))
    return std::numeric_limits<double>::quiet_NaN();
  double c = std::sqrt(1.0 / (mean_sq * m));
  Mat z = c * x;
  ChannelBatch ch = channel_forward_batch(sys.channel, z, rng);
  neural::Forward dec;
  try {
    dec = neural::forward(sys.decoder, ch.v);
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double l = neural::loss_value(loss, dec.activations.back(), symbols);
  if (!std::isfinite(l)) return l;

  neural::Backward dback = neural::backward(sys.decoder, dec, loss, symbols);
  // Through the realized channel weights: dL/dz = H .* dL/dv per sample.
  Mat gz = ch.h_diag.cwiseProduct(dback.input_grad);
  // Through the batch normalization z = c(x) x, where c depends on the whole
  // batch: dL/dx = c gz - (c / (s n)) <gz, x> x with s the batch mean
  // squared norm.
  double dot = gz.cwiseProduct(x).sum();
  Mat gx = c * gz - (c * dot / (mean_sq * m)) * x;
  neural::Backward eback = neural::backward_from_output(sys.encoder, enc, gx);

  neural::sgd_step(sys.decoder, dback.weight_grads, eta);
  neural::sgd_step(sys.encoder, eback.weight_grads, eta);
  return l;
}

TrainTrace train(AeSystem& sys, int epochs, double eta, Rng& rng, int record_every) {
  sys.validate();
  if (record_every < 1) record_every = 1;

  TrainTrace trace;
  trace.seed = rng.seed();
  trace.snr_db = 10.0 * std::log10(sys.p_av / (sys.dim * sys.channel.noise_var));

  auto record = [&](int epoch, double loss_value) {
    trace.epochs.push_back(epoch);
    trace.loss.push_back(loss_value);
    trace.fro.push_back(system_fro_norms(sys));
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const bool rec = (epoch % record_every == 0);
    std::vector<double> fro_before;
    if (rec) fro_before = system_fro_norms(sys);
    double l = train_epoch(sys, eta, rng);
    if (!std::isfinite(l)) {
      trace.diverged = true;
      trace.diverged_epoch = epoch;
      break;
    }
    if (rec) {
      trace.epochs.push_back(epoch);
      trace.loss.push_back(l);
      trace.fro.push_back(std::move(fro_before));
    }
  }

  if (!trace.diverged) {
    // Final state after the last update; evaluate on a fresh channel draw.
    AeSystem probe = sys;
    double final_loss = train_epoch(probe, 0.0, rng);
    record(epochs, final_loss);
  }
  return trace;
}

constellation::Constellation extract_constellation(const AeSystem& sys) {
  const Mat symbols = Mat::Identity(sys.alphabet_size, sys.alphabet_size);
  neural::Forward enc = neural::forward(sys.encoder, symbols);
  Mat z_rows = power_normalize(enc.activations.back().transpose(), sys.alphabet_size);
  return constellation::Constellation{z_rows, sys.p_av};
}

double evaluate_ser(const AeSystem& sys, std::int64_t n_symbols, Rng& rng) {
  if (n_symbols <= 0) throw std::invalid_argument("evaluate_ser: need a positive symbol count");
  constellation::Constellation c = extract_constellation(sys);
  const int m = sys.alphabet_size;
  const Eigen::Index d = c.points.cols();
  const std::int64_t chunk = 4096;
  std::int64_t errors = 0;
  ChannelLayer channel = sys.channel;  // local copy; pins respected
  for (std::int64_t done = 0; done < n_symbols;) {
    std::int64_t n = std::min(chunk, n_symbols - done);
    Mat z(d, n);
    std::vector<int> sent(n);
    for (std::int64_t j = 0; j < n; ++j) {
      sent[j] = rng.uniform_int(m);
      z.col(j) = c.points.row(sent[j]).transpose();
    }
    ChannelBatch ch = channel_forward_batch(channel, z, rng);
    neural::Forward dec = neural::forward(sys.decoder, ch.v);
    const Mat& out = dec.activations.back();
    for (std::int64_t j = 0; j < n; ++j) {
      Eigen::Index best;
      out.col(j).maxCoeff(&best);
      if (static_cast<int>(best) != sent[j]) ++errors;
    }
    done += n;
  }
  return static_cast<double>(errors) / static_cast<double>(n_symbols);
}

double nearest_neighbor_ser(const constellation::Constellation& c, double noise_var,
                            std::int64_t n_symbols, Rng& rng) {
  if (n_symbols <= 0) throw std::invalid_argument("nearest_neighbor_ser: need symbols");
  const int m = c.size();
  const int d = c.dim();
  std::int64_t errors = 0;
  for (std::int64_t t = 0; t < n_symbols; ++t) {
    int s = rng.uniform_int(m);
    Vec v = c.points.row(s).transpose() + std::sqrt(noise_var) * rng.normal_vec(d);
    int best = 0;
    double best_d = (v.transpose() - c.points.row(0)).squaredNorm();
    for (int i = 1; i < m; ++i) {
      double di = (v.transpose() - c.points.row(i)).squaredNorm();
      if (di < best_d) {
        best_d = di;
        best = i;
      }
    }
    if (best != s) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(n_symbols);
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::vector<std::string> header{"epoch", "loss", "snr_db", "seed"};
  for (int h = 0; h < trace.layer_count(); ++h) header.push_back("fro_" + std::to_string(h + 1));
  csv::Table table(header);
  for (std::size_t i = 0; i < trace.epochs.size(); ++i) {
    std::vector<std::string> row{csv::fmt(trace.epochs[i]), csv::fmt(trace.loss[i]),
                                 csv::fmt(trace.snr_db), csv::fmt(trace.seed)};
    for (double f : trace.fro[i]) row.push_back(csv::fmt(f));
    table.add_row(std::move(row));
  }
  table.write(path);
}

}  // namespace physlab::endtoend
