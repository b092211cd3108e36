#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "physlab/constellation.hpp"
#include "physlab/neural.hpp"
#include "physlab/numkit.hpp"

// Autoencoder link: encoder with batch power normalization, stochastic
// channel layer with an equivalent-weight view, decoder, training loop with
// Frobenius-norm telemetry, SER evaluation and constellation extraction.
namespace physlab::endtoend {

enum class ChannelKind { awgn, rayleigh_flat };
const char* channel_kind_name(ChannelKind kind);

/// Stochastic channel layer v = H z + n applied per sample. For AWGN the
/// H-part is the identity; for Rayleigh flat fading H is diagonal with
/// entries resampled i.i.d. N(0,1) on every forward pass. The realized
/// [H, n] block is exposed as the layer's equivalent weights.
struct ChannelLayer {
  ChannelKind kind = ChannelKind::awgn;
  double noise_var = 0.0;  // per-entry variance

  // Test hooks: when set they replace the random draws.
  std::optional<Vec> pinned_h_diag;
  std::optional<Vec> pinned_noise;

  std::optional<Mat> last_equivalent;  // d x (d+1) block [H, n] of the last call
};

struct ChannelOut {
  Vec v;
  Mat equivalent;  // [H, n]
};
ChannelOut channel_forward(ChannelLayer& layer, const Vec& z, Rng& rng);

/// Batched form used by the trainer; columns are samples, each with its own
/// H and noise draw.
struct ChannelBatch {
  Mat v;       // received
  Mat h_diag;  // per-sample diagonal of H (ones for AWGN)
  Mat noise;
};
ChannelBatch channel_forward_batch(ChannelLayer& layer, const Mat& z, Rng& rng);

/// Batch power normalization: rows are encoder outputs; the returned batch
/// has mean squared row norm exactly 1/M. Throws on an all-zero batch.
Mat power_normalize(const Mat& batch_rows, int alphabet_size);

/// Scaling constant sqrt(1 / (mean ||column||^2 * M)) for a column batch.
double power_scale(const Mat& batch_cols, int alphabet_size);

/// sigma_n^2 giving snr_db = 10 log10(E||z||^2 / E||n||^2) with signal power
/// 1/M spread over d noise dimensions.
double noise_var_for_snr(double snr_db, int alphabet_size, int dim);

struct AeSystem {
  neural::Network encoder;  // M -> ... -> d
  ChannelLayer channel;
  neural::Network decoder;  // d -> ... -> M
  int alphabet_size = 0;    // M
  int dim = 0;              // d
  double p_av = 0.0;        // 1/M

  void validate() const;
};

/// Dense+ReLU(M) -> Dense+linear(d) -> normalization -> channel ->
/// Dense+ReLU(M) -> Dense+softmax(M).
AeSystem make_default_system(int alphabet_size, int dim, double snr_db, ChannelKind kind,
                             Rng& rng);

struct TrainTrace {
  std::vector<int> epochs;
  std::vector<double> loss;
  std::vector<std::vector<double>> fro;  // per recorded epoch: encoder then decoder layers
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
  int diverged_epoch = -1;

  int layer_count() const { return fro.empty() ? 0 : static_cast<int>(fro.front().size()); }
};

/// One full-batch epoch over the M one-hot symbols with cross-entropy loss:
/// forward through fresh channel draws, backward through the realized
/// channel weights, one gradient step on encoder and decoder. Returns the
/// pre-update loss (NaN on divergence, with the system left untouched).
double train_epoch(AeSystem& sys, double eta, Rng& rng);

/// Runs train_epoch for `epochs` iterations, recording loss and per-layer
/// Frobenius norms every `record_every` epochs.
TrainTrace train(AeSystem& sys, int epochs, double eta, Rng& rng, int record_every = 1);

/// Encoder constellation: the M one-hot symbols pushed through the encoder
/// and batch power normalization.
constellation::Constellation extract_constellation(const AeSystem& sys);

/// Monte-Carlo symbol error rate with the system's own decoder.
double evaluate_ser(const AeSystem& sys, std::int64_t n_symbols, Rng& rng);

/// Monte-Carlo SER of a nearest-neighbor decision rule on a constellation
/// over an AWGN channel with per-dimension variance noise_var.
double nearest_neighbor_ser(const constellation::Constellation& c, double noise_var,
                            std::int64_t n_symbols, Rng& rng);

/// CSV "epoch,loss,snr_db,seed,fro_1,...,fro_H".
void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

}  // namespace physlab::endtoend
