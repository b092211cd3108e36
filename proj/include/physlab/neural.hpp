#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "physlab/numkit.hpp"

// From-scratch feedforward networks: N(0,1) weight init, sqrt(c_sigma/m)
// forward scaling, manual backpropagation and plain gradient descent.
namespace physlab::neural {

enum class Act { softplus, relu, linear, softmax };

/// Activation tag plus the variance-normalizing constant
/// c_sigma = 1 / E_{x~N(0,1)}[sigma(x)^2]. The softmax output layer is
/// excluded from scaling and carries c_sigma = 1.
struct Activation {
  Act tag = Act::linear;
  double c_sigma = 1.0;

  static Activation make(Act tag);
  static Activation from_name(const std::string& name);
  const char* name() const;
  bool scaled() const { return tag != Act::softmax; }
};

double act_value(Act tag, double z);
double act_deriv(Act tag, double z);

struct Network {
  std::vector<int> widths;              // layer widths, size depth()+1
  std::vector<Mat> weights;             // weights[h]: widths[h+1] x widths[h]
  std::vector<Activation> activations;  // one per weight layer
  std::optional<int> channel_slot;      // layer index reserved for a channel
                                        // layer when composed into a link

  int depth() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

/// Fresh network with every weight entry drawn N(0,1) from `rng`. The
/// sqrt(c_sigma/m) scaling lives in forward, not in the stored weights.
Network init(const std::vector<int>& widths, const std::vector<Activation>& activations,
             Rng& rng);

/// Forward pass over a batch (columns = samples). activations[0] is the
/// input; activations[h] the post-activation output of layer h.
/// Throws std::runtime_error naming the layer if a non-finite value appears.
struct Forward {
  std::vector<Mat> activations;
  std::vector<Mat> preactivations;  // W^(h) x^(h-1), one per layer
};
Forward forward(const Network& net, const Mat& x);

/// Convenience single-sample wrapper.
std::vector<Vec> forward_vec(const Network& net, const Vec& x);

enum class LossTag { cross_entropy, square };
struct Loss {
  LossTag tag = LossTag::square;
};

/// Mean-over-batch loss. cross_entropy expects probability-vector columns
/// (softmax output); square is mean ||pred - target||^2.
double loss_value(const Loss& loss, const Mat& pred, const Mat& target);

/// d loss / d pred for the mean-over-batch conventions above.
Mat loss_output_grad(const Loss& loss, const Mat& pred, const Mat& target);

struct Backward {
  std::vector<Mat> weight_grads;  // dL/dW^(h)
  Mat input_grad;                 // dL/d x^(0)
};

/// Backpropagation from a loss; `fwd` must come from a matching forward call.
Backward backward(const Network& net, const Forward& fwd, const Loss& loss, const Mat& target);

/// Backpropagation from an arbitrary output-side gradient dL/d x^(H).
Backward backward_from_output(const Network& net, const Forward& fwd, const Mat& output_grad);

/// In-place gradient-descent update W^(h) -= eta * grad^(h).
void sgd_step(Network& net, const std::vector<Mat>& grads, double eta);

/// ||W^(h)||_F per layer, in layer order.
std::vector<double> frobenius_norms(const Network& net);

/// Weight snapshot: JSON object {widths, activations, weights}, 17
/// significant digits, bit-exact round trip.
std::string to_json(const Network& net);
Network from_json(const std::string& text);
void save_json(const Network& net, const std::filesystem::path& path);
Network load_json(const std::filesystem::path& path);

}  // namespace physlab::neural
