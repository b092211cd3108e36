#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "physlab/chanest.hpp"
#include "physlab/neural.hpp"
#include "physlab/numkit.hpp"

// Matrix-based Renyi alpha-entropy estimation and information-plane tracking
// for recorded layer activations; empirical/population risk bookkeeping.
namespace physlab::infoflow {

/// Trace-normalized kernel Gram matrix A[i,j] = (1/n) K[i,j]/sqrt(K_ii K_jj).
struct GramMatrix {
  Mat a;
  double kernel_width = 0.0;

  int size() const { return static_cast<int>(a.rows()); }
  void validate(double sym_tol = 1e-10, double psd_tol = 1e-9, double trace_tol = 1e-10) const;
};

/// Multivariate Silverman bandwidth on a sample set (rows = samples).
/// Returns 0 for a degenerate (zero-spread) set.
double silverman_width(const Mat& samples_rows);

/// Gaussian-kernel Gram of a sample set (rows = samples). A negative width
/// selects the Silverman rule (falling back to 1 when the spread is zero);
/// an explicit zero width is a domain error.
GramMatrix gram(const Mat& samples_rows, double kernel_width = -1.0);

/// S_alpha(A) = (1/(1-alpha)) log2 sum_i lambda_i(A)^alpha, in bits.
/// Negative eigenvalues are clipped at zero before powering. alpha = 1 is
/// rejected; use a value near 1 such as the 1.01 default.
double renyi_entropy(const GramMatrix& g, double alpha = 1.01);

/// Entropy of the Hadamard product renormalized to unit trace.
double joint_entropy(const GramMatrix& ga, const GramMatrix& gb, double alpha = 1.01);

/// I_alpha(A;B) = S(A) + S(B) - S(A,B). Raw value (possibly slightly
/// negative); reporting layers clip at zero.
double mutual_information(const GramMatrix& ga, const GramMatrix& gb, double alpha = 1.01);

/// S_alpha(z|v) = S_alpha(z, v) - S_alpha(v).
double conditional_entropy(const GramMatrix& gz, const GramMatrix& gv, double alpha = 1.01);

struct InfoPlaneRecord {
  int iteration = 0;
  int layer = 0;  // 1-based hidden layer index
  double i_tv = 0.0;      // I(T; V)
  double i_tvp = 0.0;     // I(T; V')
  double i_ttp = 0.0;     // I(T; T'), mirror layer
  double mse = 0.0;       // training MSE at this iteration
  double kernel_width = 0.0;  // width used for this layer's Gram
};

struct InfoPlaneTrace {
  std::vector<InfoPlaneRecord> records;
  std::vector<double> mse_per_iteration;  // dense, indices 0..iterations
  double alpha = 1.01;
  std::uint64_t seed = 0;
};

struct PlaneConfig {
  double eta = 1e-3;
  int batch = 100;
  int iterations = 200;
  double alpha = 1.01;
  double kernel_width = -1.0;  // negative: Silverman per Gram
  int gram_samples = 200;      // dataset prefix used for the Grams
  std::vector<int> snapshots; // empty: log-spaced default
};

/// Trains `net` in place on the dataset with square loss and records the
/// layer-wise mutual informations at each snapshot iteration. V is the
/// dataset observation, V' the current network output, T a hidden layer and
/// T' its mirror.
InfoPlaneTrace record_planes(neural::Network& net, const chanest::EstimationDataset& data,
                             const PlaneConfig& cfg, Rng& rng);

/// Default snapshot schedule: dense early iterations, log spaced later.
std::vector<int> default_snapshots(int iterations);

struct RiskGap {
  double empirical = 0.0;
  double population_estimate = 0.0;
  double gap = 0.0;
};

/// Empirical risk on (x_train, y_train), held-out estimate on
/// (x_test, y_test) and their difference.
RiskGap risk_gap(const neural::Network& net, const Mat& x_train, const Mat& y_train,
                 const Mat& x_test, const Mat& y_test,
                 const neural::Loss& loss = {neural::LossTag::square});

/// CSV "iteration,layer,i_tv,i_tvp,i_ttp,mse,alpha,kernel_width,seed";
/// mutual informations are clipped at zero in the file.
void write_planes_csv(const InfoPlaneTrace& trace, const std::filesystem::path& path);

}  // namespace physlab::infoflow
