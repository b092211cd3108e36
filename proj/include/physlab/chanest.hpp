#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "physlab/neural.hpp"
#include "physlab/numkit.hpp"

// OFDM channel-estimation bench: Rayleigh multipath model with a known
// autocorrelation, LS and LMMSE estimators with closed-form MSEs, neural
// estimators of configurable depth and the depth-ordering experiment.
namespace physlab::chanest {

/// Multipath channel over n_c subcarriers: CFR h = F g with tap vector g of
/// independent complex Gaussians (variances = pdp) and F the n_c x L DFT
/// submatrix, so R_hh = F diag(pdp) F^H.
struct OfdmChannelModel {
  int n_c = 0;
  Vec pdp;    // L entries, sums to 1
  CMat dft;   // F
  CMat r_hh;  // channel autocorrelation

  int taps() const { return static_cast<int>(pdp.size()); }

  /// Exponential power-delay profile with `taps` taps and the given decay
  /// constant (in taps); taps <= 0 picks the n_c/16 default.
  static OfdmChannelModel exponential(int n_c, int taps = 0, double decay = 1.0);
  static OfdmChannelModel uniform(int n_c, int taps);
  static OfdmChannelModel from_pdp(int n_c, const Vec& pdp);
};

/// sigma_n^2 for an SNR in dB against unit per-subcarrier channel power.
double noise_var_for_snr(double snr_db);

CVec sample_channel(const OfdmChannelModel& model, Rng& rng);

/// LS observation v = h + n with i.i.d. complex Gaussian noise of per-entry
/// variance noise_var.
CVec ls_estimate(const OfdmChannelModel& model, const CVec& h, double noise_var, Rng& rng);

/// R_hh (R_hh + sigma^2 I)^{-1} v (unit-power pilots).
CVec lmmse_estimate(const OfdmChannelModel& model, const CVec& v, double noise_var);

/// Precomputed LMMSE operator for repeated application.
CMat lmmse_operator(const OfdmChannelModel& model, double noise_var);

double ls_analytic_mse(const OfdmChannelModel& model, double noise_var);
/// tr[R_hh (I + R_hh / sigma^2)^{-1}].
double lmmse_analytic_mse(const OfdmChannelModel& model, double noise_var);

/// Gaussian mutual information I(h; v) = log(|R_hh| / |R_ee|) in nats, with
/// R_ee = R_hh - R_hv R_vv^{-1} R_vh and a small ridge for rank-deficient
/// R_hh.
double analytic_gaussian_mi(const OfdmChannelModel& model, double noise_var);

/// n pairs of (observation, true CFR) columns. Observations are LS estimates
/// at the pilot subcarriers linearly interpolated (real and imaginary parts
/// independently) to all n_c subcarriers.
struct EstimationDataset {
  CMat v;  // n_c x n
  CMat z;  // n_c x n
  double snr_db = 0.0;
  int pilot_spacing = 1;

  int size() const { return static_cast<int>(v.cols()); }
  /// Real-imaginary concatenation, 2 n_c x n.
  Mat v_real() const;
  Mat z_real() const;
};

EstimationDataset build_dataset(const OfdmChannelModel& model, int n, double snr_db,
                                int pilot_spacing, Rng& rng);

/// Mean squared estimation error of the dataset observations themselves.
double dataset_mse(const EstimationDataset& data);

struct EstimatorReport {
  std::string estimator;
  double mse = 0.0;
  int n_test = 0;
  double snr_db = 0.0;
};

struct NnConfig {
  int hidden_layers = 1;
  int width = 128;
  int epochs = 200;
  double eta = 1e-3;
  int batch = 100;
  neural::Act activation = neural::Act::linear;
};

struct NnTrainResult {
  neural::Network net;
  std::vector<double> epoch_loss;
  bool diverged = false;
  int diverged_epoch = -1;
};

/// Square-loss minibatch training of a width-`width` estimator on the
/// real-imaginary concatenated pairs. Deterministic for a fixed seed.
NnTrainResult train_nn_estimator(const EstimationDataset& train, const NnConfig& cfg, Rng& rng);

/// Mean ||z - net(v)||^2 over a dataset (complex norm, summed subcarriers).
double evaluate_mse(const neural::Network& net, const EstimationDataset& data);

struct DepthSweepResult {
  std::vector<int> depths;
  std::vector<double> mean_mse;  // per depth
  Mat per_trial;                 // trials x depths
};

/// Per-trial paired comparison: each trial draws its own train/test data,
/// then trains one estimator per depth from a derived seed.
DepthSweepResult depth_sweep(const OfdmChannelModel& model, int n_train,
                             const std::vector<int>& depths, int trials, double snr_db,
                             const NnConfig& base, int n_test, Rng& rng);

/// CSV "sample,subcarrier,v_re,v_im,z_re,z_im".
void write_dataset_csv(const EstimationDataset& data, const std::filesystem::path& path);

/// CSV "estimator,snr_db,n_train,depth,width,mse,n_test,seed".
struct SweepRow {
  std::string estimator;
  double snr_db = 0.0;
  int n_train = 0;
  int depth = 0;
  int width = 0;
  double mse = 0.0;
  int n_test = 0;
  std::uint64_t seed = 0;
};
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace physlab::chanest
