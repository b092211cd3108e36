#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "physlab/endtoend.hpp"
#include "physlab/neural.hpp"
#include "physlab/numkit.hpp"

// Empirical per-layer Gram matrices of prediction gradients and their
// analytic wide-network limits; spectral-distance diagnostics.
namespace physlab::ntk {

/// Per-layer Grams G^(h)_ij = <d s_i/d W^(h), d s_j/d W^(h)> of the scalar
/// prediction s = output[target_index], plus their sum. PSD by construction.
struct EmpiricalGram {
  std::vector<Mat> per_layer;
  Mat total;
};
EmpiricalGram empirical_gram(const neural::Network& net, const Mat& inputs, int target_index = 0);

/// E[sigma(u) sigma(v)] and E[sigma'(u) sigma'(v)] under N(0, cov) for a 2x2
/// PSD covariance. Softplus integrates by escalating Gauss-Hermite
/// quadrature (order 32 then 64, agreement to 1e-8); ReLU reduces to a
/// smooth one-dimensional integral evaluated to machine precision.
double activation_moment(neural::Act act, const Mat& cov);
double activation_deriv_moment(neural::Act act, const Mat& cov);

/// Wide-network limits for a depth-H network of hidden activations `act`
/// with a scalar linear head, inputs normalized to unit norm first.
struct NtkLimit {
  std::vector<Mat> activation_kernels;  // K^(0..H): K^(h) = c E[sigma sigma] under A^(h)
  std::vector<Mat> derivative_factors;  // layer h: c E[sigma' sigma'] under A^(h)
  std::vector<Mat> per_layer;           // limit of G^(h), h = 1..H, plus the head at index H
  Mat ntk;                              // per_layer[H-1] = c K^(H-1) E[sigma' sigma']
};
NtkLimit limit_gram(const Mat& inputs, int depth, neural::Act act);

/// Largest singular value of a - b for symmetric same-shape matrices.
double spectral_distance(const Mat& a, const Mat& b);

/// Network used by the width sweep: depth hidden layers of width m plus a
/// scalar linear head.
neural::Network make_probe_network(int input_dim, int width, int depth, neural::Act act,
                                   Rng& rng);

struct WidthSweepRow {
  int width = 0;
  int depth = 0;
  std::uint64_t seed = 0;
  int layer = 0;  // 1..depth hidden, depth+1 head
  double distance = 0.0;
};

struct WidthSweepResult {
  std::vector<WidthSweepRow> rows;
  std::vector<int> widths;
  std::vector<double> mean_distance;  // per width, layer == depth (the Eq-22 pairing)
  std::vector<double> std_distance;
};

/// Fresh nets per (width, seed); empirical iteration-0 Grams against the
/// analytic limits, per layer.
WidthSweepResult width_sweep(const Mat& inputs, int depth, const std::vector<int>& widths,
                             int seeds, neural::Act act, std::uint64_t seed0);

/// Averaged per-layer weight drift (1/sqrt(m_h)) ||W^(h)(k) - W^(h)(0)||_F
/// while training an autoencoder link; a companion AWGN run with the same
/// seed is produced for contrast.
struct DriftTrace {
  std::vector<int> iterations;
  std::vector<std::vector<double>> drift;  // per record: encoder then decoder layers
  endtoend::ChannelKind kind = endtoend::ChannelKind::awgn;
  std::uint64_t seed = 0;
};
struct DriftPair {
  DriftTrace fading;
  DriftTrace awgn;
};
DriftPair fading_drift(const endtoend::AeSystem& sys, int iterations, double eta, Rng& rng,
                       int record_every = 1);

/// CSV "width,depth,seed,layer,distance".
void write_sweep_csv(const WidthSweepResult& result, const std::filesystem::path& path);

/// CSV "iteration,layer,drift,channel_kind,seed" over both traces.
void write_drift_csv(const DriftPair& pair, const std::filesystem::path& path);

}  // namespace physlab::ntk
